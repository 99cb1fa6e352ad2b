#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fbdual/market.hpp"
#include "fbdual/policy.hpp"
#include "fbdual/regression.hpp"
#include "fbdual/surface.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// Damped Picard iteration settings for the coupled solves.
struct PicardConfig {
    int max_iterations = 30;
    double damping = 0.5;      // in (0, 1]
    double tolerance = 1e-3;   // sup over steps of the cross-path RMS strategy change
    BasisSpec basis;

    void validate() const {
        if (max_iterations < 1) throw ConfigError("PicardConfig: max_iterations must be >= 1");
        if (!(damping > 0.0) || damping > 1.0) throw ConfigError("PicardConfig: damping must be in (0,1]");
        if (!(tolerance > 0.0)) throw ConfigError("PicardConfig: tolerance must be positive");
        basis.validate();
    }
};

struct PicardHistory {
    struct Iteration {
        int iteration;
        double strategy_change;
    };
    std::vector<Iteration> iterations;
    bool converged = false;
};

// Shape and provenance shared by both solution containers. Arrays are
// path-major; state arrays have n_steps+1 entries per path, integrand and
// strategy arrays n_steps (valid on [start_step, n_steps)).
struct SolutionBase {
    int n_paths = 0;
    int n_steps = 0;
    int start_step = 0;      // restart window start
    double initial_wealth = 0.0;
    std::uint64_t ensemble_seed = 0;
    double dt = 0.0;
    PicardHistory history;

    std::size_t at(int path, int k) const {
        return static_cast<std::size_t>(path) * (n_steps + 1) + k;
    }
    std::size_t step_at(int path, int k) const {
        return static_cast<std::size_t>(path) * n_steps + k;
    }
};

// Solution of the (P, psi, L, X) system: the backward component P with
// P_t + U'(X_t) a martingale and terminal value U'(X_T + H) - U'(X_T).
struct FbsdeSolutionP : SolutionBase {
    std::vector<double> x;       // wealth
    std::vector<double> p;       // backward component
    std::vector<double> psi;     // integrand against M
    std::vector<double> l_orth;  // integrand against W2
    std::vector<double> pi;      // strategy used by the forward equation
    double terminal_identity_rms = 0.0;  // RMS of P_T - (U'(X_T+H) - U'(X_T))
};

// Solution of the (Y, Z, N, X) system: Y_T = H and U'(X_t + Y_t) a martingale.
struct FbsdeSolutionY : SolutionBase {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> z;       // integrand against M
    std::vector<double> n_orth;  // integrand against W2
    std::vector<double> pi;
    double terminal_mismatch_rms = 0.0;  // RMS of Y_T - H
    long clamped_marginals = 0;          // non-positive P + U'(X) occurrences (via-P map)
};

// --- generators and strategy formulas (pointwise) ---

// Drift rate per unit time of the Y backward equation. n_rate is the
// quadratic-variation rate of the orthogonal part N.
double generator_y(double x, double y, double z, double n_rate, const MarketSpec& market,
                   const UtilitySpec& utility);

// Drift rate per unit time of the P backward equation (no orthogonal term).
double generator_p(double x, double p, double psi, const MarketSpec& market,
                   const UtilitySpec& utility);

double strategy_from_y(double x, double y, double z, const MarketSpec& market,
                       const UtilitySpec& utility);

double strategy_from_p(double x, double p, double psi, const MarketSpec& market,
                       const UtilitySpec& utility);

// --- construction and solvers ---

// Forward wealth under a per-path-per-step strategy array.
std::vector<double> simulate_wealth(const PathEnsemble& ensemble, const std::vector<double>& pi,
                                    double x0, int start_step = 0);

// The conditional-expectation construction: P_t = E(U'(X_T + H) | F_t) - U'(X_t)
// with (psi, l_orth) extracted per step from the increments of the estimated
// martingale. The terminal step is exact per path.
struct ConstructPResult {
    std::vector<double> x;
    std::vector<double> p;
    std::vector<double> psi;
    std::vector<double> l_orth;
};
ConstructPResult construct_p_from_policy(const std::vector<double>& pi, double x0,
                                         const PathEnsemble& ensemble, const UtilitySpec& utility,
                                         const BasisSpec& basis, int start_step = 0);

// Damped Picard iteration on the P system:
//   pi -> forward X -> (P, psi) -> pi' = strategy_from_p, pi <- (1-a) pi + a pi'.
// Initial guess is the myopic strategy frozen at the initial wealth. Returns
// the best iterate flagged non-converged when the cap is hit.
FbsdeSolutionP solve_system_p_picard(const PathEnsemble& ensemble, const UtilitySpec& utility,
                                     double x0, const PicardConfig& config, int start_step = 0);

enum class YSolveMode { via_p, direct };

// Y system solve. Default route solves the P system and maps
//   Y = -Uc'(P + U'(X)) - X,  Z and N via the conjugate bridge.
// The direct mode runs backward-regression Picard on the Y generator and is
// kept as a cross-check.
FbsdeSolutionY solve_system_y(const PathEnsemble& ensemble, const UtilitySpec& utility, double x0,
                              const PicardConfig& config, YSolveMode mode = YSolveMode::via_p,
                              int start_step = 0);

// Maps an existing P solution to the Y system on the same ensemble.
FbsdeSolutionY y_solution_from_p(const FbsdeSolutionP& sol_p, const PathEnsemble& ensemble,
                                 const UtilitySpec& utility);

// --- checks ---

// Per-step backward-equation residuals and the terminal reconstruction error
// (backward component rebuilt from its own increments vs its terminal
// condition).
struct ResidualStats {
    std::vector<double> per_step_rms;
    double aggregate_step_rms = 0.0;
    double terminal_reconstruction_rms = 0.0;
    double terminal_mismatch_rms = 0.0;
    double scale = 0.0;  // RMS of the backward component
};

ResidualStats residual_check_fbsde(const FbsdeSolutionP& sol, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility);
ResidualStats residual_check_fbsde(const FbsdeSolutionY& sol, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility);

// Restarts the FBSDE at (slice time of start_step, x) and reports the RMS of
// Y_t - u(t, X_t) over the field's slices in [s, T] (P_t - u for a P field).
struct RestartStats {
    double rms_discrepancy = 0.0;
    double rms_reference = 0.0;  // RMS of the compared backward component
    double relative = 0.0;
    bool converged = false;
};

RestartStats decoupling_restart_test(const DecouplingField& field, int start_step, double x,
                                     const PathEnsemble& ensemble, const UtilitySpec& utility,
                                     const PicardConfig& config);

// Fits a per-step polynomial-in-wealth policy field from a converged solution.
PolicyField fit_policy_field(const FbsdeSolutionP& sol, const PathEnsemble& ensemble,
                             const BasisSpec& basis);

} // namespace fbdual
