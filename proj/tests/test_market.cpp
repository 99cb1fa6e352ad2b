#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fbdual/market.hpp"
#include "fbdual/parallel.hpp"

using namespace fbdual;

namespace {

PathEnsemble make_ensemble(double mu, double sigma, int paths, int steps, std::uint64_t seed,
                           EndowmentSpec endowment = EndowmentSpec::constant(0.0),
                           bool w2 = false) {
    return simulate_paths(MarketSpec::make(mu, sigma, w2), TimeGrid(1.0, steps), endowment, paths,
                          seed);
}

} // namespace

TEST_CASE("driftless market: terminal price mean within 4 standard errors of S_0") {
    auto ens = make_ensemble(0.0, 0.3, 20000, 50, 7);
    double sum = 0.0, sum_sq = 0.0;
    const int n = ens.grid().n_steps();
    for (int p = 0; p < ens.n_paths(); ++p) {
        const double st = ens.s(p, n);
        sum += st;
        sum_sq += st * st;
    }
    const double mean = sum / ens.n_paths();
    const double se = std::sqrt((sum_sq / ens.n_paths() - mean * mean) / ens.n_paths());
    CHECK(std::abs(mean - 0.0) <= 4.0 * se);
}

TEST_CASE("terminal factor moments match N(0, T) within 4 standard errors") {
    auto ens = make_ensemble(0.1, 0.2, 20000, 64, 11);
    const int n = ens.grid().n_steps();
    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < ens.n_paths(); ++p) {
        sum += ens.w1(p, n);
        sum_sq += ens.w1(p, n) * ens.w1(p, n);
    }
    const double mean = sum / ens.n_paths();
    const double var = sum_sq / ens.n_paths() - mean * mean;
    const double se_mean = std::sqrt(var / ens.n_paths());
    const double se_var = var * std::sqrt(2.0 / ens.n_paths());
    CHECK(std::abs(mean) <= 4.0 * se_mean);
    CHECK(std::abs(var - 1.0) <= 4.0 * se_var);
}

TEST_CASE("same seed reproduces bit-identical ensembles regardless of thread count") {
    set_max_threads(1);
    auto a = make_ensemble(0.1, 0.2, 3000, 40, 99, EndowmentSpec::tanh_of_w2(0.5), true);
    set_max_threads(4);
    auto b = make_ensemble(0.1, 0.2, 3000, 40, 99, EndowmentSpec::tanh_of_w2(0.5), true);
    set_max_threads(0);
    bool identical = true;
    for (int p = 0; p < a.n_paths() && identical; ++p) {
        for (int k = 0; k <= a.grid().n_steps(); ++k) {
            if (a.w1(p, k) != b.w1(p, k) || a.w2(p, k) != b.w2(p, k)) {
                identical = false;
                break;
            }
        }
        if (a.endowment_value(p) != b.endowment_value(p)) identical = false;
    }
    CHECK(identical);
}

TEST_CASE("quadratic variation: mean of sum (dM)^2 near sigma^2 T") {
    const double sigma = 0.2, T = 1.0;
    auto ens = make_ensemble(0.0, sigma, 20000, 100, 13);
    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < ens.n_paths(); ++p) {
        double qv = 0.0;
        for (int k = 0; k < ens.grid().n_steps(); ++k) qv += ens.dm(p, k) * ens.dm(p, k);
        sum += qv;
        sum_sq += qv * qv;
    }
    const double mean = sum / ens.n_paths();
    const double se = std::sqrt((sum_sq / ens.n_paths() - mean * mean) / ens.n_paths());
    CHECK(std::abs(mean - sigma * sigma * T) <= 4.0 * se);
}

TEST_CASE("structure identity S = M + lambda <M> holds to roundoff on every path") {
    auto ens = make_ensemble(0.07, 0.25, 500, 64, 3);
    const double lambda = ens.market().lambda;
    double worst = 0.0;
    for (int p = 0; p < ens.n_paths(); ++p)
        for (int k = 0; k <= ens.grid().n_steps(); ++k) {
            const double lhs = ens.s(p, k) - ens.m(p, k) -
                               lambda * ens.market().covariance_rate() * ens.grid().t(k);
            worst = std::max(worst, std::abs(lhs));
        }
    CHECK(worst <= 1e-14);
    CHECK(ens.market().lambda * ens.market().sigma * ens.market().sigma == ens.market().mu);
}

TEST_CASE("endowment values are bounded by the declared bound") {
    auto ens = make_ensemble(0.1, 0.2, 5000, 20, 17, EndowmentSpec::tanh_of_w2(0.5), true);
    for (int p = 0; p < ens.n_paths(); ++p)
        CHECK(std::abs(ens.endowment_value(p)) <= ens.endowment().bound());
}

TEST_CASE("configuration errors") {
    CHECK_THROWS_AS(MarketSpec::make(0.1, 0.0), ConfigError);
    CHECK_THROWS_AS(TimeGrid(1.0, 0), ConfigError);
    CHECK_THROWS_AS(make_ensemble(0.1, 0.2, 0, 10, 1), ConfigError);
    // endowment on W2 with the factor off
    CHECK_THROWS_AS(make_ensemble(0.1, 0.2, 10, 10, 1, EndowmentSpec::tanh_of_w2(0.5), false),
                    ConfigError);
}

TEST_CASE("density process: lambda = 0 gives rho identically one") {
    auto ens = make_ensemble(0.0, 0.2, 200, 30, 5);
    auto rho = density_process(ens, ens.market());
    for (int p = 0; p < ens.n_paths(); ++p)
        for (int k = 0; k <= 30; ++k) CHECK(rho.rho(p, k) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("density process: martingale mean and lognormal variance") {
    const double mu = 0.1, sigma = 0.2, T = 1.0;
    auto ens = make_ensemble(mu, sigma, 40000, 50, 23);
    auto rho = density_process(ens, ens.market());
    const double lambda = ens.market().lambda;

    double sum = 0.0, sum_sq = 0.0, lsum = 0.0, lsum_sq = 0.0;
    for (int p = 0; p < ens.n_paths(); ++p) {
        const double r = rho.rho_terminal(p);
        sum += r;
        sum_sq += r * r;
        const double lr = std::log(r);
        lsum += lr;
        lsum_sq += lr * lr;
    }
    const int n = ens.n_paths();
    const double mean = sum / n;
    const double se = std::sqrt((sum_sq / n - mean * mean) / n);
    CHECK(rho.rho(0, 0) == 1.0);
    CHECK(std::abs(mean - 1.0) <= 4.0 * se);

    const double lvar_expected = lambda * lambda * sigma * sigma * T;
    const double lmean = lsum / n;
    const double lvar = lsum_sq / n - lmean * lmean;
    const double se_lvar = lvar * std::sqrt(2.0 / n);
    CHECK(std::abs(lvar - lvar_expected) <= 4.0 * se_lvar);

    for (int p = 0; p < n; ++p) CHECK(rho.rho_terminal(p) > 0.0);
}

TEST_CASE("dual value: lambda = 0 is deterministic and exactly Uc(y) + y") {
    auto ens = make_ensemble(0.0, 0.2, 1000, 20, 31);
    auto rho = density_process(ens, ens.market());
    auto utility = UtilitySpec::exponential(1.0);
    auto est = dual_value_estimate(1.0, rho, utility);
    // Uc(1) + 1 = -1 + 1 = 0
    CHECK(est.value == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(est.std_error == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(est.n_flagged == 0);
    CHECK_THROWS_AS(dual_value_estimate(0.0, rho, utility), DomainError);
}

TEST_CASE("weak duality on an exponential-Bachelier sample") {
    const double mu = 0.1, sigma = 0.2, h = 0.5, x0 = 0.0;
    auto ens = make_ensemble(mu, sigma, 30000, 50, 37, EndowmentSpec::constant(h));
    auto utility = UtilitySpec::exponential(1.0);
    auto rho = density_process(ens, ens.market());

    // primal estimate under the closed-form optimal constant strategy
    const double pi_star = mu / (sigma * sigma);
    double psum = 0.0, psum_sq = 0.0, ysum = 0.0;
    const int n_steps = ens.grid().n_steps();
    for (int p = 0; p < ens.n_paths(); ++p) {
        double gains = 0.0;
        for (int k = 0; k < n_steps; ++k) gains += pi_star * (ens.dm(p, k) + mu * ens.grid().dt());
        const double v = utility.value(x0 + gains + h);
        psum += v;
        psum_sq += v * v;
        ysum += utility.marginal(x0 + gains + h);
    }
    const int n = ens.n_paths();
    const double primal = psum / n;
    const double primal_se = std::sqrt((psum_sq / n - primal * primal) / n);
    const double y_hat = ysum / n;

    const auto dual = dual_value_estimate(y_hat, rho, utility);
    CHECK(dual.value >= primal - x0 * y_hat - 3.0 * (dual.std_error + primal_se));
}
