#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "fbdual/market.hpp"
#include "fbdual/regression.hpp"

using namespace fbdual;

namespace {

PathEnsemble brownian(int paths, int steps, std::uint64_t seed, bool w2 = false) {
    return simulate_paths(MarketSpec::make(0.0, 1.0, w2), TimeGrid(1.0, steps),
                          EndowmentSpec::constant(0.0), paths, seed);
}

StateColumns w1_state(const PathEnsemble& ens, int k) {
    return {{ens.w1_data() + k, ens.grid().n_points()}};
}

double rms(const std::vector<double>& v) {
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s / v.size());
}

} // namespace

TEST_CASE("constant targets are reproduced exactly by the intercept") {
    auto ens = brownian(500, 10, 1);
    std::vector<double> targets(500, 3.25);
    BasisSpec basis;
    auto fit = conditional_expectation(targets, w1_state(ens, 5), basis);
    for (double f : fit.fitted) CHECK(f == doctest::Approx(3.25).epsilon(1e-13));
    CHECK(fit.estimator.diagnostics.r_squared == doctest::Approx(1.0));
}

TEST_CASE("fitted mean equals target mean to roundoff") {
    auto ens = brownian(4000, 20, 2);
    std::vector<double> targets(4000);
    for (int p = 0; p < 4000; ++p) targets[p] = std::sin(ens.w1(p, 20)) + 0.3;
    BasisSpec basis;
    auto fit = conditional_expectation(targets, w1_state(ens, 10), basis);
    const double mt = std::accumulate(targets.begin(), targets.end(), 0.0) / targets.size();
    const double mf = std::accumulate(fit.fitted.begin(), fit.fitted.end(), 0.0) / fit.fitted.size();
    CHECK(mf == doctest::Approx(mt).epsilon(1e-13));
}

TEST_CASE("Brownian martingale: conditional expectation of W_T given W_k is W_k") {
    const int n_paths = 20000, steps = 20, k = 10;
    auto ens = brownian(n_paths, steps, 3);
    std::vector<double> targets(n_paths), diff(n_paths);
    for (int p = 0; p < n_paths; ++p) targets[p] = ens.w1(p, steps);
    BasisSpec basis;
    auto fit = conditional_expectation(targets, w1_state(ens, k), basis);
    for (int p = 0; p < n_paths; ++p) diff[p] = fit.fitted[p] - ens.w1(p, k);
    const double t_k = ens.grid().t(k);
    CHECK(rms(diff) <= 3.0 * std::sqrt(1.0 - t_k) / std::sqrt(static_cast<double>(n_paths)) *
                           std::sqrt(4.0));  // 4 basis functions
}

TEST_CASE("conditional second moment: E[W_T^2 | W_k] = W_k^2 + (T - t_k)") {
    const int steps = 20, k = 8;
    double prev_mae = 1e9;
    for (int n_paths : {4000, 64000}) {
        auto ens = brownian(n_paths, steps, 5);
        std::vector<double> targets(n_paths);
        for (int p = 0; p < n_paths; ++p) targets[p] = ens.w1(p, steps) * ens.w1(p, steps);
        BasisSpec basis;
        auto fit = conditional_expectation(targets, w1_state(ens, k), basis);
        double mae = 0.0;
        const double tau = 1.0 - ens.grid().t(k);
        for (int p = 0; p < n_paths; ++p)
            mae += std::abs(fit.fitted[p] - (ens.w1(p, k) * ens.w1(p, k) + tau));
        mae /= n_paths;
        CHECK(mae < prev_mae);
        prev_mae = mae;
    }
    CHECK(prev_mae < 0.02);
}

TEST_CASE("projection idempotence") {
    auto ens = brownian(3000, 10, 7);
    std::vector<double> targets(3000);
    for (int p = 0; p < 3000; ++p) targets[p] = std::cos(ens.w1(p, 10));

    BasisSpec exact;
    exact.ridge = 0.0;
    auto fit1 = conditional_expectation(targets, w1_state(ens, 6), exact);
    auto fit2 = conditional_expectation(fit1.fitted, w1_state(ens, 6), exact);
    double worst = 0.0;
    for (int p = 0; p < 3000; ++p) worst = std::max(worst, std::abs(fit1.fitted[p] - fit2.fitted[p]));
    CHECK(worst <= 1e-11);

    BasisSpec ridged;  // default ridge
    auto fit3 = conditional_expectation(targets, w1_state(ens, 6), ridged);
    auto fit4 = conditional_expectation(fit3.fitted, w1_state(ens, 6), ridged);
    worst = 0.0;
    for (int p = 0; p < 3000; ++p) worst = std::max(worst, std::abs(fit3.fitted[p] - fit4.fitted[p]));
    CHECK(worst <= 1e-6);
}

TEST_CASE("tower property on polynomial targets") {
    const int n_paths = 20000, steps = 20, j = 5, k = 12;
    auto ens = brownian(n_paths, steps, 9);
    std::vector<double> targets(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        const double w = ens.w1(p, steps);
        targets[p] = w * w * w - 2.0 * w;
    }
    BasisSpec basis;
    auto inner = conditional_expectation(targets, w1_state(ens, k), basis);
    auto nested = conditional_expectation(inner.fitted, w1_state(ens, j), basis);
    auto direct = conditional_expectation(targets, w1_state(ens, j), basis);

    std::vector<double> d(n_paths);
    for (int p = 0; p < n_paths; ++p) d[p] = nested.fitted[p] - direct.fitted[p];
    const double resid_rms = std::sqrt(inner.estimator.diagnostics.residual_variance);
    const double dim = 4.0;
    CHECK(rms(d) <= 2.0 * resid_rms * std::sqrt(dim / n_paths));
}

TEST_CASE("singular design without ridge raises a numerical error advising ridge") {
    auto ens = brownian(200, 10, 11);
    std::vector<double> targets(200);
    for (int p = 0; p < 200; ++p) targets[p] = ens.w1(p, 10);
    // duplicated state column makes the monomial design rank-deficient
    StateColumns dup = {{ens.w1_data() + 5, ens.grid().n_points()},
                        {ens.w1_data() + 5, ens.grid().n_points()}};
    BasisSpec no_ridge;
    no_ridge.ridge = 0.0;
    no_ridge.degree = 2;
    bool threw = false;
    try {
        conditional_expectation(targets, dup, no_ridge);
    } catch (const NumericalError& e) {
        threw = true;
        CHECK(std::string(e.what()).find("ridge") != std::string::npos);
    }
    CHECK(threw);

    BasisSpec with_ridge;
    with_ridge.degree = 2;  // default ridge handles the deficiency
    CHECK_NOTHROW(conditional_expectation(targets, dup, with_ridge));
}

TEST_CASE("integrands: martingale c*M loads c on its own driver") {
    const int n_paths = 20000;
    auto ens = brownian(n_paths, 10, 13);
    const int k = 4;
    const double c = 1.7;
    std::vector<double> incr(n_paths), dm(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        dm[p] = ens.dm(p, k);
        incr[p] = c * dm[p];
    }
    BasisSpec basis;
    basis.ridge = 0.0;
    auto fit = fit_step_integrands(incr, dm, {}, w1_state(ens, k), basis);
    for (int p = 0; p < n_paths; ++p) CHECK(fit.psi[p] == doctest::Approx(c).epsilon(1e-9));
    CHECK(fit.psi_orth.empty());
}

TEST_CASE("integrands: constant process has zero integrands") {
    auto ens = brownian(5000, 10, 15, true);
    const int k = 3;
    std::vector<double> incr(5000, 0.0), dm(5000), dw2(5000);
    for (int p = 0; p < 5000; ++p) {
        dm[p] = ens.dm(p, k);
        dw2[p] = ens.dw2(p, k);
    }
    BasisSpec basis;
    auto fit = fit_step_integrands(incr, dm, dw2, w1_state(ens, k), basis);
    for (int p = 0; p < 5000; ++p) {
        CHECK(fit.psi[p] == doctest::Approx(0.0).epsilon(1e-13));
        CHECK(fit.psi_orth[p] == doctest::Approx(0.0).epsilon(1e-13));
    }
}

TEST_CASE("integrands: the orthogonal factor loads on its own driver only") {
    const int n_paths = 30000;
    auto ens = brownian(n_paths, 10, 17, true);
    const int k = 6;
    std::vector<double> incr(n_paths), dm(n_paths), dw2(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        dm[p] = ens.dm(p, k);
        dw2[p] = ens.dw2(p, k);
        incr[p] = dw2[p];  // martingale W2
    }
    BasisSpec basis;
    auto fit = fit_step_integrands(incr, dm, dw2, w1_state(ens, k), basis);
    std::vector<double> psi_err(n_paths), orth_err(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        psi_err[p] = fit.psi[p];
        orth_err[p] = fit.psi_orth[p] - 1.0;
    }
    CHECK(rms(psi_err) <= 0.05);
    CHECK(rms(orth_err) <= 0.05);
}

TEST_CASE("residuals are orthogonal to both drivers in sample") {
    const int n_paths = 8000;
    auto ens = brownian(n_paths, 10, 19, true);
    const int k = 5;
    std::vector<double> incr(n_paths), dm(n_paths), dw2(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        dm[p] = ens.dm(p, k);
        dw2[p] = ens.dw2(p, k);
        const double w = ens.w1(p, k);
        incr[p] = (1.0 + 0.5 * w) * dm[p] - 0.7 * dw2[p] + 0.01 * std::sin(ens.w2(p, k));
    }
    BasisSpec basis;
    basis.ridge = 0.0;  // exact least squares: residuals orthogonal to machine precision
    auto fit = fit_step_integrands(incr, dm, dw2, w1_state(ens, k), basis);
    double cov_m = 0.0, cov_o = 0.0, scale = 0.0, mean_r = 0.0;
    std::vector<double> resid(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        resid[p] = incr[p] - fit.psi[p] * dm[p] - fit.psi_orth[p] * dw2[p];
        mean_r += resid[p];
    }
    mean_r /= n_paths;
    for (int p = 0; p < n_paths; ++p) {
        cov_m += (resid[p] - mean_r) * dm[p];
        cov_o += (resid[p] - mean_r) * dw2[p];
        scale += std::abs(incr[p] * dm[p]);
    }
    cov_m /= n_paths;
    cov_o /= n_paths;
    scale /= n_paths;
    CHECK(std::abs(cov_m) <= 1e-10 * scale);
    CHECK(std::abs(cov_o) <= 1e-10 * scale);
}

TEST_CASE("degenerate driver is flagged and its integrand zeroed") {
    const int n_paths = 1000;
    auto ens = brownian(n_paths, 10, 21, true);
    const int k = 2;
    std::vector<double> incr(n_paths), dm(n_paths, 0.0), dw2(n_paths);
    for (int p = 0; p < n_paths; ++p) {
        dw2[p] = ens.dw2(p, k);
        incr[p] = 0.4 * dw2[p];
    }
    BasisSpec basis;
    basis.ridge = 0.0;
    auto fit = fit_step_integrands(incr, dm, dw2, w1_state(ens, k), basis);
    CHECK(fit.degenerate_m);
    CHECK_FALSE(fit.degenerate_orth);
    for (int p = 0; p < n_paths; ++p) {
        CHECK(fit.psi[p] == 0.0);
        CHECK(fit.psi_orth[p] == doctest::Approx(0.4).epsilon(1e-9));
    }
}
