#include "fbdual/regression.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace fbdual {

namespace {

// Exponent tuples of total degree 1..degree over n_vars variables,
// enumerated in a fixed (graded) order.
std::vector<std::vector<int>> monomial_exponents(int n_vars, int degree) {
    std::vector<std::vector<int>> out;
    if (n_vars == 0) return out;
    std::vector<int> cur(n_vars, 0);
    auto rec = [&](auto&& self, int var, int remaining) -> void {
        if (var == n_vars - 1) {
            cur[var] = remaining;
            out.push_back(cur);
            cur[var] = 0;
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[var] = e;
            self(self, var + 1, remaining - e);
        }
        cur[var] = 0;
    };
    for (int d = 1; d <= degree; ++d) rec(rec, 0, d);
    return out;
}

double eval_monomial(const std::vector<int>& expo, const StateColumns& states, std::size_t p) {
    double v = 1.0;
    for (std::size_t i = 0; i < expo.size(); ++i) {
        const double s = states[i][p];
        for (int e = 0; e < expo[i]; ++e) v *= s;
    }
    return v;
}

struct StandardizedDesign {
    Eigen::MatrixXd z;             // n x q, centered and scaled columns
    std::vector<double> mean, scale;
    std::vector<int> kept;         // indices into the raw column set
    int n_dropped = 0;
};

// Centers and scales columns, dropping those with (numerically) zero variance.
StandardizedDesign standardize(Eigen::MatrixXd& raw) {
    const auto n = raw.rows();
    StandardizedDesign d;
    std::vector<int> kept;
    for (Eigen::Index j = 0; j < raw.cols(); ++j) {
        const double mu = raw.col(j).mean();
        const double var = (raw.col(j).array() - mu).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd <= 1e-13 * (1.0 + std::abs(mu))) {
            ++d.n_dropped;
            continue;
        }
        kept.push_back(static_cast<int>(j));
        d.mean.push_back(mu);
        d.scale.push_back(sd);
    }
    d.z.resize(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t j = 0; j < kept.size(); ++j)
        d.z.col(j) = (raw.col(kept[j]).array() - d.mean[j]) / d.scale[j];
    d.kept = std::move(kept);
    return d;
}

// Ridge-regularized normal equations on the standardized design; the
// intercept is implicit (targets centered). Throws for singular systems when
// ridge == 0.
Eigen::VectorXd solve_ls(const StandardizedDesign& d, const Eigen::VectorXd& y_centered,
                         double ridge) {
    const Eigen::Index q = d.z.cols();
    if (q == 0) return Eigen::VectorXd();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(q, q);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(d.z.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    const double n = static_cast<double>(d.z.rows());
    if (ridge > 0.0) gram.diagonal().array() += ridge * n;
    Eigen::VectorXd rhs = d.z.transpose() * y_centered;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        if (ridge > 0.0) throw NumericalError("regression: normal equations not positive definite");
        throw NumericalError(
            "regression: singular design matrix; set a positive regression.ridge");
    }
    Eigen::VectorXd c = ldlt.solve(rhs);
    // Guard against a semidefinite system that LDLT "solved" with garbage.
    if (!c.allFinite()) {
        if (ridge > 0.0) throw NumericalError("regression: unstable normal equations");
        throw NumericalError(
            "regression: singular design matrix; set a positive regression.ridge");
    }
    return c;
}

} // namespace

double ConditionalEstimator::evaluate(const std::vector<double>& state) const {
    double v = coefficients.empty() ? 0.0 : coefficients[0];
    for (std::size_t m = 0; m < exponents.size(); ++m) {
        double term = 1.0;
        for (std::size_t i = 0; i < exponents[m].size(); ++i) {
            for (int e = 0; e < exponents[m][i]; ++e) term *= state[i];
        }
        v += coefficients[m + 1] * term;
    }
    return v;
}

FitResult conditional_expectation(std::span<const double> targets, const StateColumns& states,
                                  const BasisSpec& basis) {
    basis.validate();
    const std::size_t n = targets.size();
    const auto expos = monomial_exponents(static_cast<int>(states.size()), basis.degree);
    if (n <= expos.size() + 1)
        throw ConfigError("conditional_expectation: need n_paths > basis dimension");

    Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(expos.size()));
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t m = 0; m < expos.size(); ++m)
            raw(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(m)) =
                eval_monomial(expos[m], states, p);

    auto design = standardize(raw);

    Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(n));
    const double y_mean = y.mean();
    Eigen::VectorXd yc = y.array() - y_mean;

    const Eigen::VectorXd c = solve_ls(design, yc, basis.ridge);

    FitResult out;
    out.fitted.resize(n);
    Eigen::VectorXd fitted = design.z.cols() > 0
                                 ? Eigen::VectorXd(design.z * c)
                                 : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t p = 0; p < n; ++p) out.fitted[p] = y_mean + fitted(static_cast<Eigen::Index>(p));

    // Back out raw-space coefficients: fitted = c0 + sum_j beta_j * monomial_j.
    out.estimator.exponents = expos;
    out.estimator.coefficients.assign(expos.size() + 1, 0.0);
    double c0 = y_mean;
    for (std::size_t j = 0; j < design.kept.size(); ++j) {
        const double beta = c(static_cast<Eigen::Index>(j)) / design.scale[j];
        out.estimator.coefficients[design.kept[j] + 1] = beta;
        c0 -= beta * design.mean[j];
    }
    out.estimator.coefficients[0] = c0;

    const double sst = yc.squaredNorm();
    const double ssr = (yc - fitted).squaredNorm();
    out.estimator.diagnostics.r_squared = sst > 0.0 ? 1.0 - ssr / sst : 1.0;
    out.estimator.diagnostics.residual_variance = n > 1 ? ssr / (static_cast<double>(n) - 1.0) : 0.0;
    out.estimator.diagnostics.ridge_used = basis.ridge > 0.0;
    out.estimator.diagnostics.n_dropped_columns = design.n_dropped;
    return out;
}

IntegrandFit fit_step_integrands(std::span<const double> increments, std::span<const double> dm,
                                 std::span<const double> dw2, const StateColumns& states,
                                 const BasisSpec& basis) {
    basis.validate();
    const std::size_t n = increments.size();
    if (dm.size() != n) throw ConfigError("fit_step_integrands: dm size mismatch");
    const bool has_orth = !dw2.empty();
    if (has_orth && dw2.size() != n) throw ConfigError("fit_step_integrands: dw2 size mismatch");

    const auto expos = monomial_exponents(static_cast<int>(states.size()), basis.degree);
    const std::size_t q = expos.size() + 1;  // constant + monomials per driver

    auto driver_variance = [&](std::span<const double> d) {
        double mu = 0.0;
        for (double v : d) mu += v;
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (double v : d) var += (v - mu) * (v - mu);
        return var / static_cast<double>(n);
    };

    IntegrandFit out;
    out.degenerate_m = driver_variance(dm) <= 1e-24;
    out.degenerate_orth = has_orth ? driver_variance(dw2) <= 1e-24 : false;

    const bool use_m = !out.degenerate_m;
    const bool use_orth = has_orth && !out.degenerate_orth;

    out.psi.assign(n, 0.0);
    if (has_orth) out.psi_orth.assign(n, 0.0);
    if (!use_m && !use_orth) return out;

    const std::size_t cols = (use_m ? q : 0) + (use_orth ? q : 0);
    if (n <= cols + 1)
        throw ConfigError("fit_step_integrands: need n_paths > regressor count");

    Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
    for (std::size_t p = 0; p < n; ++p) {
        const auto r = static_cast<Eigen::Index>(p);
        Eigen::Index j = 0;
        if (use_m) {
            raw(r, j++) = dm[p];
            for (const auto& e : expos) raw(r, j++) = eval_monomial(e, states, p) * dm[p];
        }
        if (use_orth) {
            raw(r, j++) = dw2[p];
            for (const auto& e : expos) raw(r, j++) = eval_monomial(e, states, p) * dw2[p];
        }
    }

    auto design = standardize(raw);
    Eigen::Map<const Eigen::VectorXd> y(increments.data(), static_cast<Eigen::Index>(n));
    const double y_mean = y.mean();
    Eigen::VectorXd yc = y.array() - y_mean;
    const Eigen::VectorXd c = solve_ls(design, yc, basis.ridge);

    // Raw-space coefficients per driver block.
    std::vector<double> beta(cols, 0.0);
    for (std::size_t j = 0; j < design.kept.size(); ++j)
        beta[design.kept[j]] = c(static_cast<Eigen::Index>(j)) / design.scale[j];

    for (std::size_t p = 0; p < n; ++p) {
        std::size_t j = 0;
        if (use_m) {
            double v = beta[j++];
            for (const auto& e : expos) v += beta[j++] * eval_monomial(e, states, p);
            out.psi[p] = v;
        }
        if (use_orth) {
            double v = beta[j++];
            for (const auto& e : expos) v += beta[j++] * eval_monomial(e, states, p);
            out.psi_orth[p] = v;
        }
    }
    return out;
}

} // namespace fbdual
