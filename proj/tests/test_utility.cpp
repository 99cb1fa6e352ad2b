#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "fbdual/utility.hpp"
#include "oracles.hpp"

using fbdual::UtilitySpec;

namespace {

UtilitySpec generic_mixture() {
    // -e^{-x} - e^{-2x}/2: finite on R, Inada limits on both sides
    return UtilitySpec::generic(
        [](double x) { return -std::exp(-x) - 0.5 * std::exp(-2.0 * x); },
        [](double x) { return std::exp(-x) + std::exp(-2.0 * x); },
        [](double x) { return -std::exp(-x) - 2.0 * std::exp(-2.0 * x); },
        [](double x) { return std::exp(-x) + 4.0 * std::exp(-2.0 * x); });
}

std::vector<double> test_grid(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

} // namespace

TEST_CASE("exponential derivative tuples at zero") {
    auto u1 = UtilitySpec::exponential(1.0);
    auto d = u1.u_derivatives(0.0);
    CHECK(d.value == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d.d1 == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.d2 == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(d.d3 == doctest::Approx(1.0).epsilon(1e-15));

    auto u2 = UtilitySpec::exponential(2.0);
    auto e = u2.u_derivatives(0.0);
    CHECK(e.value == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(e.d1 == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.d2 == doctest::Approx(-4.0).epsilon(1e-15));
    CHECK(e.d3 == doctest::Approx(8.0).epsilon(1e-15));
}

TEST_CASE("finite differences reproduce the derivatives") {
    for (auto spec : {UtilitySpec::exponential(1.0), UtilitySpec::exponential(2.0), generic_mixture()}) {
        const double x = 0.3;
        auto d = spec.u_derivatives(x);
        const double h1 = 1e-5;
        const double fd1 =
            (spec.u_derivatives(x + h1).value - spec.u_derivatives(x - h1).value) / (2 * h1);
        const double h2 = 1e-4;
        const double fd2 = (spec.u_derivatives(x + h2).value - 2 * d.value +
                            spec.u_derivatives(x - h2).value) /
                           (h2 * h2);
        const double h3 = 1e-3;
        const double fd3 = (spec.u_derivatives(x + 2 * h3).value - 2 * spec.u_derivatives(x + h3).value +
                            2 * spec.u_derivatives(x - h3).value - spec.u_derivatives(x - 2 * h3).value) /
                           (2 * h3 * h3 * h3);
        CHECK(fd1 == doctest::Approx(d.d1).epsilon(1e-6));
        CHECK(fd2 == doctest::Approx(d.d2).epsilon(1e-6));
        CHECK(fd3 == doctest::Approx(d.d3).epsilon(1e-6));
    }
}

TEST_CASE("conjugate closed form at gamma=1, y=1 and grid-maximization oracle") {
    auto u = UtilitySpec::exponential(1.0);
    auto c = u.conjugate_derivatives(1.0);
    CHECK(c.value == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(c.d1 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(c.d2 == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.d3 == doctest::Approx(-1.0).epsilon(1e-14));

    for (double y : {0.3, 1.0, 2.7}) {
        const double brute = oracles::conjugate_by_grid(
            [&](double x) { return u.u_derivatives(x).value; }, y);
        CHECK(u.conjugate_derivatives(y).value == doctest::Approx(brute).epsilon(1e-9));
    }
}

TEST_CASE("conjugate dominates U(x) - xy with equality at x = -Uc'(y)") {
    for (auto spec : {UtilitySpec::exponential(1.3), generic_mixture()}) {
        for (double y : {0.2, 0.9, 3.1}) {
            const auto c = spec.conjugate_derivatives(y);
            for (double x : test_grid(-4.0, 4.0, 41))
                CHECK(c.value >= spec.u_derivatives(x).value - x * y - 1e-9);
            const double x_star = -c.d1;
            CHECK(c.value ==
                  doctest::Approx(spec.u_derivatives(x_star).value - x_star * y).epsilon(1e-8));
        }
    }
}

TEST_CASE("generic conjugate via Newton matches finite differences of the brute-force value") {
    auto spec = generic_mixture();
    for (double y : {0.4, 1.0, 2.5}) {
        auto u_fn = [&](double x) { return spec.u_derivatives(x).value; };
        const double h = 1e-4 * y;
        const double fd = (oracles::conjugate_by_grid(u_fn, y + h) -
                           oracles::conjugate_by_grid(u_fn, y - h)) /
                          (2 * h);
        CHECK(spec.conjugate_derivatives(y).d1 == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("inverse marginal utility") {
    auto u = UtilitySpec::exponential(1.0);
    CHECK(u.inverse_marginal(1.0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(u.inverse_marginal(std::exp(1.0)) == doctest::Approx(-1.0).epsilon(1e-12));
    for (double y : {0.1, 1.0, 10.0}) {
        CHECK(u.u_derivatives(u.inverse_marginal(y)).d1 == doctest::Approx(y).epsilon(1e-10));
        auto g = generic_mixture();
        CHECK(g.u_derivatives(g.inverse_marginal(y)).d1 == doctest::Approx(y).epsilon(1e-8));
    }
}

// The third identity is Uc'''(U'(x)) = U'''(x)/U''(x)^3: differentiating
// Uc''(U'(x)) = -1/U''(x) once more gives the plus sign, and the closed-form
// conjugate values at gamma=1 confirm it.
TEST_CASE("duality identities on a 100-point grid") {
    auto grid = test_grid(-3.0, 3.0, 100);

    auto check = [&](const UtilitySpec& spec, double tol) {
        for (double x : grid) {
            const auto d = spec.u_derivatives(x);
            const auto c = spec.conjugate_derivatives(d.d1);
            CHECK(std::abs(c.d1 + x) <= tol * (1.0 + std::abs(x)));
            CHECK(std::abs(c.d2 + 1.0 / d.d2) <= tol * std::abs(1.0 / d.d2));
            const double expected3 = d.d3 / (d.d2 * d.d2 * d.d2);
            CHECK(std::abs(c.d3 - expected3) <= tol * std::abs(expected3));
        }
    };
    check(UtilitySpec::exponential(1.0), 1e-9);
    check(UtilitySpec::exponential(2.5), 1e-9);
    check(generic_mixture(), 1e-6);
}

TEST_CASE("exponential generator ratios are constant") {
    for (double gamma : {0.5, 1.0, 3.0}) {
        auto u = UtilitySpec::exponential(gamma);
        for (double x : test_grid(-2.0, 2.0, 21)) {
            const auto d = u.u_derivatives(x);
            CHECK(d.d1 / d.d2 == doctest::Approx(-1.0 / gamma).epsilon(1e-13));
            CHECK(d.d3 * d.d1 * d.d1 / (d.d2 * d.d2 * d.d2) ==
                  doctest::Approx(-1.0 / gamma).epsilon(1e-13));
            CHECK(d.d3 / d.d2 == doctest::Approx(-gamma).epsilon(1e-13));
        }
    }
}

TEST_CASE("domain errors") {
    auto u = UtilitySpec::exponential(1.0);
    CHECK_THROWS_AS(u.u_derivatives(std::nan("")), fbdual::DomainError);
    CHECK_THROWS_AS(u.conjugate_derivatives(0.0), fbdual::DomainError);
    CHECK_THROWS_AS(u.conjugate_derivatives(-1.0), fbdual::DomainError);
    CHECK_THROWS_AS(u.inverse_marginal(-2.0), fbdual::DomainError);
    CHECK_THROWS_AS(UtilitySpec::exponential(0.0), fbdual::ConfigError);
}
