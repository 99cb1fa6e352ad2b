#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fbdual/errors.hpp"

namespace fbdual {

// State variables a cross-sectional fit may condition on.
enum class StateVar { wealth, w1, w2 };

// Polynomial regression basis: monomials of total degree <= degree over the
// selected state variables, plus an (always unpenalized) intercept.
struct BasisSpec {
    std::vector<StateVar> states{StateVar::wealth};
    int degree = 3;
    double ridge = 1e-8;

    static constexpr int kMaxDegree = 12;

    void validate() const {
        if (degree < 0 || degree > kMaxDegree)
            throw ConfigError("BasisSpec: degree must be in [0, 12]");
        if (ridge < 0.0) throw ConfigError("BasisSpec: ridge must be >= 0");
    }
};

// A read-only strided view of one state variable across paths.
struct StateColumn {
    const double* data = nullptr;
    std::ptrdiff_t stride = 1;
    double operator[](std::size_t p) const { return data[static_cast<std::ptrdiff_t>(p) * stride]; }
};

using StateColumns = std::vector<StateColumn>;

struct FitDiagnostics {
    double r_squared = 1.0;
    double residual_variance = 0.0;
    bool ridge_used = false;
    int n_dropped_columns = 0;  // zero-variance columns removed from the design
};

// Fitted cross-sectional least-squares projection. Coefficients are stored in
// raw monomial space, so the estimator can be re-evaluated at other states.
struct ConditionalEstimator {
    std::vector<double> coefficients;        // over [1, monomials...]
    std::vector<std::vector<int>> exponents; // exponent tuple per monomial
    FitDiagnostics diagnostics;

    double evaluate(const std::vector<double>& state) const;
};

struct FitResult {
    std::vector<double> fitted;  // per path
    ConditionalEstimator estimator;
};

// L2-projection of targets on the basis span over the given state columns.
// The intercept is always included and unpenalized, so the fitted mean equals
// the target mean to roundoff. Throws NumericalError for a singular design
// when ridge == 0 (advising a positive ridge).
FitResult conditional_expectation(std::span<const double> targets, const StateColumns& states,
                                  const BasisSpec& basis);

// Per-step integrand extraction: regresses one step's martingale increments
// on the driver increments with state-dependent (basis-expanded)
// coefficients. Residuals are orthogonal in sample to every regressor, in
// particular to both drivers. A driver with degenerate cross-sectional
// variance is flagged and its integrand zeroed.
struct IntegrandFit {
    std::vector<double> psi;       // fitted integrand against dM, per path
    std::vector<double> psi_orth;  // fitted integrand against dW2, per path (empty if no dW2)
    bool degenerate_m = false;
    bool degenerate_orth = false;
};

IntegrandFit fit_step_integrands(std::span<const double> increments, std::span<const double> dm,
                                 std::span<const double> dw2, const StateColumns& states,
                                 const BasisSpec& basis);

} // namespace fbdual
