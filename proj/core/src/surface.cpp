#include "fbdual/surface.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "fbdual/parallel.hpp"

namespace fbdual {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> build_slice_steps(const TimeGrid& grid, int t_slices) {
    const int n = grid.n_steps();
    const int want = std::max(2, t_slices);
    const int stride = std::max(1, n / (want - 1));
    std::vector<int> steps;
    for (int k = 0; k < n; k += stride) steps.push_back(k);
    steps.push_back(n);
    return steps;
}

StateColumns slice_states(const PathEnsemble& ensemble, int k) {
    StateColumns cols;
    const std::ptrdiff_t stride = ensemble.grid().n_points();
    // factor states at the slice time; wealth is pinned at the restart value
    cols.push_back({ensemble.w1_data() + k, stride});
    if (ensemble.has_w2()) cols.push_back({ensemble.w2_data() + k, stride});
    return cols;
}

struct CellPass {
    std::vector<double> target_u;   // per path
    std::vector<double> target_um;  // per path
    long flagged = 0;
};

// Restarts wealth at (slice step k0, x0) on every ensemble path and evaluates
// the terminal utility (and marginal) targets.
void run_restarts(const PathEnsemble& ens, const PolicyField& policy, int k0, double x0,
                  bool want_value, bool want_marginal, const UtilitySpec& utility, CellPass& out) {
    const int n_steps = ens.grid().n_steps();
    const int n_paths = ens.n_paths();
    const double mu_dt = ens.market().mu * ens.grid().dt();
    if (want_value) out.target_u.assign(n_paths, 0.0);
    if (want_marginal) out.target_um.assign(n_paths, 0.0);

    std::atomic<long> flagged{0};
    parallel_for_chunks(static_cast<std::size_t>(n_paths), [&](std::size_t b, std::size_t e) {
        long local_flagged = 0;
        for (std::size_t p = b; p < e; ++p) {
            double x = x0;
            for (int k = k0; k < n_steps; ++k) {
                const double pi = policy.evaluate(k, x);
                x += pi * (ens.dm(static_cast<int>(p), k) + mu_dt);
            }
            const double wt = x + ens.endowment_value(static_cast<int>(p));
            if (!std::isfinite(wt)) {
                ++local_flagged;
                if (want_value) out.target_u[p] = kNaN;
                if (want_marginal) out.target_um[p] = kNaN;
                continue;
            }
            if (want_value) out.target_u[p] = utility.value(wt);
            if (want_marginal) out.target_um[p] = utility.marginal(wt);
        }
        flagged.fetch_add(local_flagged);
    });
    out.flagged = flagged.load();
}

struct CellStats {
    double mean = 0.0;
    double se = 0.0;
};

// Mean/se (two-pass variance) with NaN targets replaced by the cell mean
// (counted by the caller).
CellStats reduce_and_patch(std::vector<double>& targets) {
    double sum = 0.0;
    long n_ok = 0;
    for (double t : targets) {
        if (std::isfinite(t)) {
            sum += t;
            ++n_ok;
        }
    }
    CellStats st;
    if (n_ok > 0) {
        st.mean = sum / n_ok;
        if (n_ok > 1) {
            double sq = 0.0;
            for (double t : targets)
                if (std::isfinite(t)) sq += (t - st.mean) * (t - st.mean);
            st.se = std::sqrt(sq / (n_ok - 1) / n_ok);
        }
    }
    for (double& t : targets)
        if (!std::isfinite(t)) t = st.mean;
    return st;
}

} // namespace

std::vector<double> default_xgrid(double x0, const MarketSpec& market, const UtilitySpec& utility,
                                  const TimeGrid& grid, const SurfaceConfig& config) {
    if (config.x_points < 2) throw ConfigError("surface: x_points must be >= 2");
    const double pi_ref = -market.lambda * utility.marginal(x0) / utility.marginal2(x0);
    const double half =
        config.x_span_sigmas * market.sigma * std::max(std::abs(pi_ref), 1.0) * std::sqrt(grid.horizon());
    std::vector<double> xs(config.x_points);
    const double dx = 2.0 * half / (config.x_points - 1);
    for (int j = 0; j < config.x_points; ++j) xs[j] = x0 - half + j * dx;
    return xs;
}

ValueSurface estimate_value_surface(const MarketSpec& market, const UtilitySpec& utility,
                                    const PolicyField& policy, const TimeGrid& grid,
                                    const std::vector<double>& xgrid, const PathEnsemble& ensemble,
                                    const SurfaceConfig& config, bool with_marginal) {
    if (xgrid.size() < 2) throw ConfigError("estimate_value_surface: x-grid needs >= 2 points");
    if (market.sigma != ensemble.market().sigma || market.lambda != ensemble.market().lambda)
        throw ConfigError("estimate_value_surface: market spec does not match the ensemble");
    const int n_paths = ensemble.n_paths();
    const int nx = static_cast<int>(xgrid.size());

    ValueSurface surf;
    surf.slice_steps = build_slice_steps(grid, config.t_slices);
    const int S = surf.n_slices();
    surf.slice_times.resize(S);
    for (int s = 0; s < S; ++s) surf.slice_times[s] = grid.t(surf.slice_steps[s]);
    surf.xs = xgrid;
    surf.policy_used = policy.describe();
    surf.ensemble_seed = ensemble.seed();
    surf.ensemble_paths = n_paths;
    surf.dt = grid.dt();

    surf.v = Grid2D(S, nx);
    surf.se_v = Grid2D(S, nx);
    surf.phi = Grid2D(S, nx);
    surf.ell = Grid2D(S, nx);
    surf.drift_v = Grid2D(S, nx);
    if (with_marginal) {
        surf.vm = Grid2D(S, nx);
        surf.se_vm = Grid2D(S, nx);
        surf.phi_m = Grid2D(S, nx);
        surf.ell_m = Grid2D(S, nx);
        surf.drift_vm = Grid2D(S, nx);
        surf.has_marginal = true;
    }

    // per-slice-interval driver increments, shared by every x cell
    std::vector<std::vector<double>> dm_slice(S - 1), dw2_slice;
    if (ensemble.has_w2()) dw2_slice.resize(S - 1);
    for (int s = 0; s + 1 < S; ++s) {
        dm_slice[s].resize(n_paths);
        if (ensemble.has_w2()) dw2_slice[s].resize(n_paths);
        for (int p = 0; p < n_paths; ++p) {
            dm_slice[s][p] = ensemble.m(p, surf.slice_steps[s + 1]) - ensemble.m(p, surf.slice_steps[s]);
            if (ensemble.has_w2())
                dw2_slice[s][p] =
                    ensemble.w2(p, surf.slice_steps[s + 1]) - ensemble.w2(p, surf.slice_steps[s]);
        }
    }

    BasisSpec cell_basis = config.basis;   // conditional-field fit
    BasisSpec scalar_basis;                // per-cell scalar integrands
    scalar_basis.states.clear();
    scalar_basis.degree = 0;
    scalar_basis.ridge = config.basis.ridge;

    std::vector<std::vector<double>> condV(S), condVm(with_marginal ? S : 0);

    for (int j = 0; j < nx; ++j) {
        for (int s = 0; s < S; ++s) {
            const int k0 = surf.slice_steps[s];
            CellPass pass;
            run_restarts(ensemble, policy, k0, xgrid[j], true, with_marginal, utility, pass);
            surf.flagged_cells += pass.flagged;

            const CellStats stats_u = reduce_and_patch(pass.target_u);
            surf.v.at(s, j) = stats_u.mean;
            surf.se_v.at(s, j) = stats_u.se;
            CellStats stats_um;
            if (with_marginal) {
                stats_um = reduce_and_patch(pass.target_um);
                surf.vm.at(s, j) = stats_um.mean;
                surf.se_vm.at(s, j) = stats_um.se;
            }

            // conditional field: exact at the terminal slice, fitted before it
            if (s == S - 1 || k0 == grid.n_steps()) {
                condV[s] = std::move(pass.target_u);
                if (with_marginal) condVm[s] = std::move(pass.target_um);
            } else {
                auto states = slice_states(ensemble, k0);
                if (k0 == 0) {
                    // F_0 is trivial: the conditional value is the plain mean
                    condV[s].assign(n_paths, stats_u.mean);
                    if (with_marginal) condVm[s].assign(n_paths, stats_um.mean);
                } else {
                    condV[s] = conditional_expectation(pass.target_u, states, cell_basis).fitted;
                    if (with_marginal)
                        condVm[s] = conditional_expectation(pass.target_um, states, cell_basis).fitted;
                }
            }
        }

        // martingale decomposition of the conditional field along the slices
        std::vector<double> incr(n_paths);
        for (int s = 0; s + 1 < S; ++s) {
            const double dt_slice = surf.slice_times[s + 1] - surf.slice_times[s];
            auto states = slice_states(ensemble, surf.slice_steps[s]);

            for (int p = 0; p < n_paths; ++p) incr[p] = condV[s + 1][p] - condV[s][p];
            double mean_incr = 0.0;
            for (double v : incr) mean_incr += v;
            mean_incr /= n_paths;
            surf.drift_v.at(s, j) = mean_incr / dt_slice;
            {
                auto fit = fit_step_integrands(incr, dm_slice[s],
                                               ensemble.has_w2() ? std::span<const double>(dw2_slice[s])
                                                                 : std::span<const double>(),
                                               states, scalar_basis);
                surf.phi.at(s, j) = fit.psi.empty() ? 0.0 : fit.psi[0];
                surf.ell.at(s, j) = fit.psi_orth.empty() ? 0.0 : fit.psi_orth[0];
            }
            if (with_marginal) {
                for (int p = 0; p < n_paths; ++p) incr[p] = condVm[s + 1][p] - condVm[s][p];
                mean_incr = 0.0;
                for (double v : incr) mean_incr += v;
                mean_incr /= n_paths;
                surf.drift_vm.at(s, j) = mean_incr / dt_slice;
                auto fit = fit_step_integrands(incr, dm_slice[s],
                                               ensemble.has_w2() ? std::span<const double>(dw2_slice[s])
                                                                 : std::span<const double>(),
                                               states, scalar_basis);
                surf.phi_m.at(s, j) = fit.psi.empty() ? 0.0 : fit.psi[0];
                surf.ell_m.at(s, j) = fit.psi_orth.empty() ? 0.0 : fit.psi_orth[0];
            }
        }
    }
    return surf;
}

Grid2D marginal_surface(const MarketSpec& market, const UtilitySpec& utility,
                        const PolicyField& policy, const TimeGrid& grid,
                        const std::vector<double>& xgrid, const PathEnsemble& ensemble,
                        const SurfaceConfig& config) {
    ValueSurface s =
        estimate_value_surface(market, utility, policy, grid, xgrid, ensemble, config, true);
    return s.vm;
}

void project_monotone_concave(std::vector<double>& row) {
    const int n = static_cast<int>(row.size());
    if (n < 3) return;
    const double mean_before = [&] {
        double m = 0.0;
        for (double v : row) m += v;
        return m / n;
    }();

    // pool-adjacent-violators for non-increasing first differences
    std::vector<double> d(n - 1);
    for (int i = 0; i + 1 < n; ++i) d[i] = row[i + 1] - row[i];
    std::vector<double> block_sum;
    std::vector<int> block_len;
    for (int i = 0; i < n - 1; ++i) {
        block_sum.push_back(d[i]);
        block_len.push_back(1);
        while (block_sum.size() > 1) {
            const std::size_t m = block_sum.size();
            if (block_sum[m - 2] / block_len[m - 2] >= block_sum[m - 1] / block_len[m - 1]) break;
            block_sum[m - 2] += block_sum[m - 1];
            block_len[m - 2] += block_len[m - 1];
            block_sum.pop_back();
            block_len.pop_back();
        }
    }
    std::vector<double> pooled;
    pooled.reserve(n - 1);
    for (std::size_t b = 0; b < block_sum.size(); ++b)
        for (int r = 0; r < block_len[b]; ++r) pooled.push_back(block_sum[b] / block_len[b]);

    // strict monotonicity: floor the pooled differences at a small positive value
    double max_abs = 0.0;
    for (double v : pooled) max_abs = std::max(max_abs, std::abs(v));
    const double eps = std::max(1e-300, 1e-10 * max_abs);
    for (double& v : pooled) v = std::max(v, eps);

    for (int i = 1; i < n; ++i) row[i] = row[i - 1] + pooled[i - 1];
    double mean_after = 0.0;
    for (double v : row) mean_after += v;
    mean_after /= n;
    for (double& v : row) v += mean_before - mean_after;
}

namespace {

void fd_first(const Grid2D& f, Grid2D& out, double dx) {
    for (int s = 0; s < f.rows; ++s) {
        const int n = f.cols;
        for (int j = 1; j + 1 < n; ++j)
            out.at(s, j) = (f.at(s, j + 1) - f.at(s, j - 1)) / (2.0 * dx);
        out.at(s, 0) = (-3.0 * f.at(s, 0) + 4.0 * f.at(s, 1) - f.at(s, 2)) / (2.0 * dx);
        out.at(s, n - 1) =
            (3.0 * f.at(s, n - 1) - 4.0 * f.at(s, n - 2) + f.at(s, n - 3)) / (2.0 * dx);
    }
}

void fd_second(const Grid2D& f, Grid2D& out, double dx) {
    for (int s = 0; s < f.rows; ++s) {
        const int n = f.cols;
        for (int j = 1; j + 1 < n; ++j)
            out.at(s, j) = (f.at(s, j + 1) - 2.0 * f.at(s, j) + f.at(s, j - 1)) / (dx * dx);
        out.at(s, 0) = out.at(s, 1);
        out.at(s, n - 1) = out.at(s, n - 2);
    }
}

void fd_third(const Grid2D& f, Grid2D& out, double dx) {
    for (int s = 0; s < f.rows; ++s) {
        const int n = f.cols;
        for (int j = 2; j + 2 < n; ++j)
            out.at(s, j) = (f.at(s, j + 2) - 2.0 * f.at(s, j + 1) + 2.0 * f.at(s, j - 1) -
                            f.at(s, j - 2)) /
                           (2.0 * dx * dx * dx);
        out.at(s, 0) = out.at(s, 1) = out.at(s, 2);
        out.at(s, n - 1) = out.at(s, n - 2) = out.at(s, n - 3);
    }
}

} // namespace

void surface_derivatives(ValueSurface& surface, const SurfaceConfig& config) {
    const int nx = surface.n_x();
    if (nx < 5) throw ConfigError("surface_derivatives: x-grid needs >= 5 points");
    const double dx = surface.xs[1] - surface.xs[0];
    const int S = surface.n_slices();

    Grid2D v = surface.v;
    if (config.smooth) {
        for (int s = 0; s < S; ++s) {
            std::vector<double> row(v.row(s), v.row(s) + nx);
            project_monotone_concave(row);
            for (int j = 0; j < nx; ++j) v.at(s, j) = row[j];
        }
        surface.v = v;
    }

    surface.vx = Grid2D(S, nx);
    surface.vxx = Grid2D(S, nx);
    surface.vxxx = Grid2D(S, nx);
    surface.phi_x = Grid2D(S, nx);
    surface.phi_xx = Grid2D(S, nx);
    surface.a = Grid2D(S, nx);
    surface.a_x = Grid2D(S, nx);

    fd_first(v, surface.vx, dx);
    fd_second(v, surface.vxx, dx);
    fd_third(v, surface.vxxx, dx);
    fd_first(surface.phi, surface.phi_x, dx);
    fd_second(surface.phi, surface.phi_xx, dx);
    for (int s = 0; s < S; ++s)
        for (int j = 0; j < nx; ++j) surface.a.at(s, j) = -surface.drift_v.at(s, j);
    fd_first(surface.a, surface.a_x, dx);
    surface.has_derivatives = true;
}

namespace {

double slice_vpp_floor(const ValueSurface& surf, int s, double rel) {
    double m = 0.0;
    for (int j = 0; j < surf.n_x(); ++j) m = std::max(m, std::abs(surf.vxx.at(s, j)));
    return rel * m;
}

ResidualTable finalize_table(Grid2D cells) {
    ResidualTable t;
    double sum_sq = 0.0;
    for (double c : cells.data) {
        if (std::isfinite(c)) {
            sum_sq += c * c;
            t.max_abs = std::max(t.max_abs, std::abs(c));
            ++t.interior_count;
        }
    }
    t.rms = t.interior_count > 0 ? std::sqrt(sum_sq / t.interior_count) : 0.0;
    t.cells = std::move(cells);
    return t;
}

} // namespace

ResidualTable bspde_residual(const ValueSurface& surface, const MarketSpec& market,
                             const SurfaceConfig& config) {
    if (!surface.has_derivatives) throw ConfigError("bspde_residual: derivatives not filled");
    const int S = surface.n_slices();
    const int nx = surface.n_x();
    const double c_rate = market.covariance_rate();

    // drift side per unit time at slice s; the measured drift spans
    // [t_s, t_{s+1}], so the right-hand side is averaged over the interval
    // endpoints (kills the O(dt_slice) evaluation bias)
    auto rhs_at = [&](int s, int j) -> double {
        const double vpp = surface.vxx.at(s, j);
        const double q = surface.phi_x.at(s, j) + market.lambda * surface.vx.at(s, j);
        return 0.5 * q * q * c_rate / vpp;
    };

    Grid2D cells(S, nx, kNaN);
    int excluded = 0;
    for (int s = 0; s + 1 < S; ++s) {
        const double floor = slice_vpp_floor(surface, s, config.vpp_floor_rel);
        for (int j = 1; j + 1 < nx; ++j) {
            const double vpp = surface.vxx.at(s, j);
            if (std::abs(vpp) < floor || vpp == 0.0) {
                ++excluded;
                continue;
            }
            const double vpp_next = surface.vxx.at(s + 1, j);
            const double rhs = std::abs(vpp_next) >= floor && vpp_next != 0.0
                                   ? 0.5 * (rhs_at(s, j) + rhs_at(s + 1, j))
                                   : rhs_at(s, j);
            cells.at(s, j) = surface.drift_v.at(s, j) - rhs;
        }
    }
    ResidualTable t = finalize_table(std::move(cells));
    t.excluded_floor = excluded;
    return t;
}

ResidualTable bspde_derivative_residual(const ValueSurface& surface, const MarketSpec& market,
                                        const SurfaceConfig& config) {
    if (!surface.has_derivatives) throw ConfigError("bspde_derivative_residual: derivatives not filled");
    if (!surface.has_marginal)
        throw ConfigError("bspde_derivative_residual: marginal pass required for drift of V'");
    const int S = surface.n_slices();
    const int nx = surface.n_x();
    const double c_rate = market.covariance_rate();

    auto rhs_at = [&](int s, int j) -> double {
        const double vpp = surface.vxx.at(s, j);
        const double q = market.lambda * surface.vx.at(s, j) + surface.phi_x.at(s, j);
        const double bracket = (market.lambda * vpp + surface.phi_xx.at(s, j)) / vpp -
                               0.5 * surface.vxxx.at(s, j) * q / (vpp * vpp);
        return bracket * c_rate * q;
    };

    Grid2D cells(S, nx, kNaN);
    int excluded = 0;
    for (int s = 0; s + 1 < S; ++s) {
        const double floor = slice_vpp_floor(surface, s, config.vpp_floor_rel);
        for (int j = 2; j + 2 < nx; ++j) {
            const double vpp = surface.vxx.at(s, j);
            if (std::abs(vpp) < floor || vpp == 0.0) {
                ++excluded;
                continue;
            }
            const double vpp_next = surface.vxx.at(s + 1, j);
            const double rhs = std::abs(vpp_next) >= floor && vpp_next != 0.0
                                   ? 0.5 * (rhs_at(s, j) + rhs_at(s + 1, j))
                                   : rhs_at(s, j);
            cells.at(s, j) = surface.drift_vm.at(s, j) - rhs;
        }
    }
    ResidualTable t = finalize_table(std::move(cells));
    t.excluded_floor = excluded;
    return t;
}

Grid2D strategy_from_surface(const ValueSurface& surface, const MarketSpec& market,
                             const SurfaceConfig& config, int* excluded) {
    if (!surface.has_derivatives) throw ConfigError("strategy_from_surface: derivatives not filled");
    const int S = surface.n_slices();
    const int nx = surface.n_x();
    Grid2D pi(S, nx, kNaN);
    int n_excluded = 0;
    for (int s = 0; s < S; ++s) {
        const double floor = slice_vpp_floor(surface, s, config.vpp_floor_rel);
        for (int j = 0; j < nx; ++j) {
            const double vpp = surface.vxx.at(s, j);
            if (std::abs(vpp) < floor || vpp == 0.0) {
                ++n_excluded;
                continue;
            }
            pi.at(s, j) =
                -(surface.phi_x.at(s, j) + market.lambda * surface.vx.at(s, j)) / vpp;
        }
    }
    if (excluded) *excluded = n_excluded;
    return pi;
}

} // namespace fbdual
