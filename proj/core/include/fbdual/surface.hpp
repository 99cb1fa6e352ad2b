#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbdual/market.hpp"
#include "fbdual/policy.hpp"
#include "fbdual/regression.hpp"
#include "fbdual/time_grid.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// Dense (slice, x) cell array.
struct Grid2D {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Grid2D() = default;
    Grid2D(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
    bool empty() const { return data.empty(); }
};

struct SurfaceConfig {
    int x_points = 41;
    double x_span_sigmas = 4.0;  // half-width = x_span_sigmas * sigma * max(|pi_ref|,1) * sqrt(T)
    int t_slices = 21;           // target slice count including t=0 and t=T
    bool smooth = false;         // monotone-concave projection of V slices before differencing
    double vpp_floor_rel = 1e-6; // |V''| floor, relative to the slice max
    BasisSpec basis;             // conditional-field fits and integrand extraction
};

// Estimated dynamic value field on a (t, x) grid together with its
// martingale decomposition per cell:
//   v        restart Monte Carlo estimate of V(t, x)
//   phi      integrand of V(., x) against M (per-slice-interval regression)
//   ell      integrand against W2 (zero when the market is complete)
//   drift_v  measured drift of V(., x) per unit time; a = -drift_v
// vm/phi_m/ell_m/drift_vm are the analogous direct estimates for the marginal
// field V'(t, x). x-derivatives are central finite differences (one-sided at
// the edges) filled by surface_derivatives.
class ValueSurface {
public:
    std::vector<int> slice_steps;  // indices into the simulation grid, first = 0, last = n_steps
    std::vector<double> slice_times;
    std::vector<double> xs;

    Grid2D v, se_v, phi, ell, drift_v;
    Grid2D vm, se_vm, phi_m, ell_m, drift_vm;  // marginal pass (optional)
    Grid2D vx, vxx, vxxx, phi_x, phi_xx, a, a_x;

    bool has_marginal = false;
    bool has_derivatives = false;
    long flagged_cells = 0;  // cells with non-finite restart wealth contributions

    // run metadata
    std::string policy_used;
    std::uint64_t ensemble_seed = 0;
    int ensemble_paths = 0;
    double dt = 0.0;

    int n_slices() const { return static_cast<int>(slice_steps.size()); }
    int n_x() const { return static_cast<int>(xs.size()); }
    double t(int s) const { return slice_times[s]; }
};

// Discrete decoupling field u(t, x) with its construction route.
struct DecouplingField {
    enum class Kind { y_field, p_field };
    Kind kind = Kind::y_field;
    std::vector<int> slice_steps;
    std::vector<double> slice_times;
    std::vector<double> xs;
    Grid2D u;

    int n_slices() const { return static_cast<int>(slice_steps.size()); }
    double evaluate(int slice, double x) const { return interp_row_clamped(xs, u.row(slice), x); }
};

struct ResidualTable {
    Grid2D cells;    // NaN where excluded
    double rms = 0.0;
    double max_abs = 0.0;
    int interior_count = 0;
    int excluded_floor = 0;  // cells under the |V''| floor
};

// Default x-grid: x_points uniform points spanning x0 +/- x_span_sigmas *
// sigma * max(|pi_myopic(x0)|, 1) * sqrt(T).
std::vector<double> default_xgrid(double x0, const MarketSpec& market, const UtilitySpec& utility,
                                  const TimeGrid& grid, const SurfaceConfig& config);

// Restart Monte Carlo estimate of the value field under the given policy.
// Every cell reuses the one ensemble's increments (common random numbers), so
// cell errors are strongly correlated across the grid. with_marginal also
// fills the marginal-field arrays from the same restarts.
ValueSurface estimate_value_surface(const MarketSpec& market, const UtilitySpec& utility,
                                    const PolicyField& policy, const TimeGrid& grid,
                                    const std::vector<double>& xgrid, const PathEnsemble& ensemble,
                                    const SurfaceConfig& config, bool with_marginal = false);

// Standalone marginal field V'(t,x) = restart estimate of E U'(X_T^{t,x} + H).
Grid2D marginal_surface(const MarketSpec& market, const UtilitySpec& utility,
                        const PolicyField& policy, const TimeGrid& grid,
                        const std::vector<double>& xgrid, const PathEnsemble& ensemble,
                        const SurfaceConfig& config);

// Fills vx, vxx, vxxx, phi_x, phi_xx, a, a_x by finite differences (after the
// optional monotone-concave projection of the V slices). Requires >= 5 x
// points.
void surface_derivatives(ValueSurface& surface, const SurfaceConfig& config);

// Per-cell BSPDE residual: drift(V) - (phi' + lambda V')^2 C / (2 V'').
ResidualTable bspde_residual(const ValueSurface& surface, const MarketSpec& market,
                             const SurfaceConfig& config);

// Per-cell residual of the x-differentiated equation: drift(V') -
// [(V'' lambda + phi'')/V'' - (V''' / 2) (V' lambda + phi')/V''^2] C (V' lambda + phi').
// Requires the marginal pass (drift of V').
ResidualTable bspde_derivative_residual(const ValueSurface& surface, const MarketSpec& market,
                                        const SurfaceConfig& config);

// Strategy field pi(t,x) = -(phi' + lambda V') / V''; cells under the |V''|
// floor are excluded (NaN).
Grid2D strategy_from_surface(const ValueSurface& surface, const MarketSpec& market,
                             const SurfaceConfig& config, int* excluded = nullptr);

// In-place monotone-concave projection of one slice (non-increasing first
// differences via pool-adjacent-violators, then a positive floor on them).
void project_monotone_concave(std::vector<double>& row);

} // namespace fbdual
