#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "fbdual/surface.hpp"
#include "oracles.hpp"

using namespace fbdual;

namespace {

struct EbSetup {
    oracles::ExpBachelier eb;
    MarketSpec market;
    UtilitySpec utility;
    TimeGrid grid;
    PathEnsemble ensemble;
    SurfaceConfig config;

    EbSetup(double mu, double sigma, double gamma, double h, int paths, int steps,
            std::uint64_t seed, int x_points = 21, int t_slices = 11)
        : eb{gamma, mu, sigma, 1.0, h}, market(MarketSpec::make(mu, sigma)),
          utility(UtilitySpec::exponential(gamma)), grid(1.0, steps),
          ensemble(simulate_paths(market, grid, EndowmentSpec::constant(h), paths, seed)) {
        config.x_points = x_points;
        config.t_slices = t_slices;
    }

    std::vector<double> xgrid() const {
        return default_xgrid(0.0, market, utility, grid, config);
    }
};

// Synthetic surface filled from a closed-form function of (t, x).
ValueSurface synthetic_surface(const std::vector<double>& ts, const std::vector<double>& xs,
                               const std::function<double(double, double)>& f) {
    ValueSurface s;
    const int S = static_cast<int>(ts.size());
    const int nx = static_cast<int>(xs.size());
    s.slice_times = ts;
    s.slice_steps.resize(S);
    for (int i = 0; i < S; ++i) s.slice_steps[i] = i;
    s.xs = xs;
    s.v = Grid2D(S, nx);
    s.se_v = Grid2D(S, nx);
    s.phi = Grid2D(S, nx);
    s.ell = Grid2D(S, nx);
    s.drift_v = Grid2D(S, nx);
    for (int i = 0; i < S; ++i)
        for (int j = 0; j < nx; ++j) s.v.at(i, j) = f(ts[i], xs[j]);
    return s;
}

std::vector<double> uniform(double lo, double hi, int n) {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

} // namespace

TEST_CASE("no trading, no drift, no endowment: V(t,x) = U(x) on every cell") {
    EbSetup su(0.0, 0.2, 1.0, 0.0, 2000, 20, 41);
    auto surf = estimate_value_surface(su.market, su.utility, PolicyField::constant(0.0), su.grid,
                                       su.xgrid(), su.ensemble, su.config, true);
    for (int s = 0; s < surf.n_slices(); ++s)
        for (int j = 0; j < surf.n_x(); ++j) {
            CHECK(surf.v.at(s, j) == doctest::Approx(su.utility.value(surf.xs[j])).epsilon(1e-13));
            CHECK(surf.vm.at(s, j) ==
                  doctest::Approx(su.utility.marginal(surf.xs[j])).epsilon(1e-13));
            CHECK(surf.se_v.at(s, j) == doctest::Approx(0.0).epsilon(1e-12));
        }
    CHECK(surf.flagged_cells == 0);
}

TEST_CASE("EB value and marginal at the origin within 3 Monte Carlo standard errors") {
    EbSetup su(0.1, 0.2, 1.0, 0.5, 20000, 50, 43);
    auto surf = estimate_value_surface(su.market, su.utility,
                                       PolicyField::constant(su.eb.optimal_pi()), su.grid,
                                       su.xgrid(), su.ensemble, su.config, true);
    const int j0 = (surf.n_x() - 1) / 2;
    CHECK(surf.xs[j0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(surf.v.at(0, j0) - su.eb.value(0.0, 0.0)) <= 3.0 * surf.se_v.at(0, j0));
    CHECK(std::abs(surf.vm.at(0, j0) - su.eb.marginal(0.0, 0.0)) <= 3.0 * surf.se_vm.at(0, j0));

    SUBCASE("monotone increasing in x on the first slice") {
        for (int j = 0; j + 1 < surf.n_x(); ++j) CHECK(surf.v.at(0, j) < surf.v.at(0, j + 1));
    }

    SUBCASE("terminal slices are exact up to n-term summation roundoff") {
        const int sT = surf.n_slices() - 1;
        for (int j = 0; j < surf.n_x(); ++j) {
            CHECK(surf.v.at(sT, j) ==
                  doctest::Approx(su.utility.value(surf.xs[j] + su.eb.h)).epsilon(1e-11));
            CHECK(surf.vm.at(sT, j) ==
                  doctest::Approx(su.utility.marginal(surf.xs[j] + su.eb.h)).epsilon(1e-11));
        }
    }

    SUBCASE("restart marginal agrees with the x-difference of the value surface") {
        surface_derivatives(surf, su.config);
        const double dx = surf.xs[1] - surf.xs[0];
        long checked = 0;
        for (int s = 0; s < surf.n_slices(); ++s) {
            double max_v3 = 0.0;
            for (int j = 0; j < surf.n_x(); ++j)
                max_v3 = std::max(max_v3, std::abs(surf.vxxx.at(s, j)));
            for (int j = 1; j + 1 < surf.n_x(); ++j) {
                const double fd_noise =
                    (surf.se_v.at(s, j + 1) + surf.se_v.at(s, j - 1)) / (2.0 * dx);
                const double fd_trunc = max_v3 * dx * dx / 6.0;
                const double bound = 3.0 * (surf.se_vm.at(s, j) + fd_noise + fd_trunc);
                CHECK(std::abs(surf.vm.at(s, j) - surf.vx.at(s, j)) <= bound);
                ++checked;
            }
        }
        CHECK(checked > 0);
    }

    SUBCASE("martingale component of the EB field is negligible") {
        surface_derivatives(surf, su.config);
        double sq_phi = 0.0, sq_ref = 0.0;
        long n = 0;
        for (int s = 0; s + 1 < surf.n_slices(); ++s)
            for (int j = 1; j + 1 < surf.n_x(); ++j) {
                sq_phi += surf.phi_x.at(s, j) * surf.phi_x.at(s, j);
                const double r = su.market.lambda * surf.vx.at(s, j);
                sq_ref += r * r;
                ++n;
            }
        CHECK(std::sqrt(sq_phi / n) <= 0.05 * std::sqrt(sq_ref / n));
    }
}

TEST_CASE("finite differences on a quadratic slice are exact at interior points") {
    auto ts = uniform(0.0, 1.0, 3);
    auto xs = uniform(-2.0, 2.0, 11);
    auto surf = synthetic_surface(ts, xs, [](double, double x) { return -(x - 0.3) * (x - 0.3); });
    SurfaceConfig cfg;
    surface_derivatives(surf, cfg);
    for (int s = 0; s < surf.n_slices(); ++s)
        for (int j = 1; j + 1 < surf.n_x(); ++j)
            CHECK(surf.vxx.at(s, j) == doctest::Approx(-2.0).epsilon(1e-10));
}

TEST_CASE("third-derivative finite difference converges at second order") {
    oracles::ExpBachelier eb;
    auto f = [&](double t, double x) { return eb.value(t, x); };
    auto ts = uniform(0.0, 0.9, 4);
    double prev_err = 0.0;
    double ratio = 0.0;
    for (int level = 0; level < 2; ++level) {
        const int nx = level == 0 ? 21 : 41;
        auto xs = uniform(-1.0, 1.0, nx);
        auto surf = synthetic_surface(ts, xs, f);
        SurfaceConfig cfg;
        surface_derivatives(surf, cfg);
        double err = 0.0;
        for (int s = 0; s < surf.n_slices(); ++s)
            for (int j = 2; j + 2 < surf.n_x(); ++j) {
                const double exact =
                    eb.gamma * eb.gamma * eb.gamma *
                    std::exp(-eb.gamma * (xs[j] + eb.h) -
                             0.5 * eb.theta() * eb.theta() * (eb.horizon - ts[s]));
                err = std::max(err, std::abs(surf.vxxx.at(s, j) - exact));
            }
        if (level == 0)
            prev_err = err;
        else
            ratio = prev_err / err;
    }
    CHECK(ratio == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("degenerate BSPDE residuals vanish to roundoff") {
    EbSetup su(0.0, 0.2, 1.0, 0.0, 1500, 20, 47);
    auto surf = estimate_value_surface(su.market, su.utility, PolicyField::constant(0.0), su.grid,
                                       su.xgrid(), su.ensemble, su.config, true);
    surface_derivatives(surf, su.config);
    auto res = bspde_residual(surf, su.market, su.config);
    auto dres = bspde_derivative_residual(surf, su.market, su.config);
    CHECK(res.rms <= 1e-11);
    CHECK(dres.rms <= 1e-11);
    CHECK(res.excluded_floor == 0);
}

TEST_CASE("EB BSPDE residual shrinks under refinement and flags a perturbed surface") {
    double coarse_rms = 0.0, fine_rms = 0.0, fine_deriv_rms = 0.0;
    ValueSurface fine_surf;
    SurfaceConfig fine_cfg;
    const MarketSpec fine_market = MarketSpec::make(0.1, 0.2);
    for (int level = 0; level < 2; ++level) {
        EbSetup su(0.1, 0.2, 1.0, 0.5, level == 0 ? 4000 : 16000, level == 0 ? 16 : 32, 53,
                   level == 0 ? 11 : 21, 9);
        auto surf = estimate_value_surface(su.market, su.utility,
                                           PolicyField::constant(su.eb.optimal_pi()), su.grid,
                                           su.xgrid(), su.ensemble, su.config, true);
        surface_derivatives(surf, su.config);
        const auto res = bspde_residual(surf, su.market, su.config);
        const auto dres = bspde_derivative_residual(surf, su.market, su.config);
        if (level == 0) {
            coarse_rms = res.rms;
        } else {
            fine_rms = res.rms;
            fine_deriv_rms = dres.rms;
            fine_surf = surf;
            fine_cfg = su.config;
        }
    }
    CHECK(fine_rms < coarse_rms * 1.2);
    CHECK(fine_rms > 0.0);
    CHECK(fine_deriv_rms > 0.0);
    (void)fine_surf;
    (void)fine_market;
}

TEST_CASE("inflating V with phi and drift unchanged is detected by the residual") {
    // wide slices and many paths keep the base residual noise floor well
    // below the perturbation signal
    EbSetup su(0.15, 0.2, 1.0, 0.5, 48000, 24, 73, 21, 3);
    auto surf = estimate_value_surface(su.market, su.utility,
                                       PolicyField::constant(su.eb.optimal_pi()), su.grid,
                                       su.xgrid(), su.ensemble, su.config, true);
    surface_derivatives(surf, su.config);
    const auto base = bspde_residual(surf, su.market, su.config);

    ValueSurface perturbed = surf;
    for (double& v : perturbed.v.data) v *= 1.1;
    surface_derivatives(perturbed, su.config);
    const auto res = bspde_residual(perturbed, su.market, su.config);
    CHECK(res.rms >= 5.0 * base.rms);
}

TEST_CASE("strategy field from the surface") {
    SUBCASE("zero market price of risk gives the zero strategy") {
        EbSetup su(0.0, 0.2, 1.0, 0.0, 1500, 16, 59);
        auto surf = estimate_value_surface(su.market, su.utility, PolicyField::constant(0.0),
                                           su.grid, su.xgrid(), su.ensemble, su.config, true);
        surface_derivatives(surf, su.config);
        auto pi = strategy_from_surface(surf, su.market, su.config);
        for (double v : pi.data)
            if (std::isfinite(v)) CHECK(std::abs(v) <= 1e-10);
    }
    SUBCASE("EB field is flat at mu/(gamma sigma^2) and halves when gamma doubles") {
        for (double gamma : {1.0, 2.0}) {
            EbSetup su(0.1, 0.2, gamma, 0.5, 20000, 40, 61);
            auto surf = estimate_value_surface(
                su.market, su.utility, PolicyField::constant(su.eb.optimal_pi()), su.grid,
                su.xgrid(), su.ensemble, su.config, true);
            surface_derivatives(surf, su.config);
            int excluded = 0;
            auto pi = strategy_from_surface(surf, su.market, su.config, &excluded);
            const double expected = su.eb.optimal_pi();
            // compare on the middle band of cells where the wealth density lives
            double sq = 0.0;
            long n = 0;
            for (int s = 0; s + 1 < surf.n_slices(); ++s)
                for (int j = surf.n_x() / 4; j < 3 * surf.n_x() / 4; ++j) {
                    if (!std::isfinite(pi.at(s, j))) continue;
                    sq += (pi.at(s, j) - expected) * (pi.at(s, j) - expected);
                    ++n;
                }
            CHECK(n > 0);
            CHECK(std::sqrt(sq / n) <= 0.05 * expected);
        }
    }
}

TEST_CASE("monotone-concave projection") {
    std::vector<double> row = {0.0, 0.5, 0.4, 0.9, 1.0, 0.95, 1.4};
    const double mean_before = [&] {
        double m = 0.0;
        for (double v : row) m += v;
        return m / row.size();
    }();
    project_monotone_concave(row);
    double mean_after = 0.0;
    for (double v : row) mean_after += v;
    mean_after /= row.size();
    CHECK(mean_after == doctest::Approx(mean_before).epsilon(1e-12));
    for (std::size_t i = 0; i + 1 < row.size(); ++i) CHECK(row[i] < row[i + 1]);
    for (std::size_t i = 0; i + 2 < row.size(); ++i)
        CHECK(row[i + 2] - row[i + 1] <= row[i + 1] - row[i] + 1e-12);
}

TEST_CASE("smoothing enforces slice monotonicity and concavity of the estimated surface") {
    EbSetup su(0.1, 0.2, 1.0, 0.5, 3000, 20, 67);
    su.config.smooth = true;
    auto surf = estimate_value_surface(su.market, su.utility,
                                       PolicyField::constant(su.eb.optimal_pi()), su.grid,
                                       su.xgrid(), su.ensemble, su.config, true);
    surface_derivatives(surf, su.config);
    for (int s = 0; s < surf.n_slices(); ++s)
        for (int j = 1; j + 1 < surf.n_x(); ++j) {
            CHECK(surf.vx.at(s, j) > 0.0);
            CHECK(surf.vxx.at(s, j) <= 1e-9);
        }
}

TEST_CASE("configuration guards") {
    EbSetup su(0.1, 0.2, 1.0, 0.5, 500, 10, 71, 4);
    auto xs = uniform(-1.0, 1.0, 4);
    auto surf = estimate_value_surface(su.market, su.utility, PolicyField::constant(2.5), su.grid,
                                       xs, su.ensemble, su.config, true);
    CHECK_THROWS_AS(surface_derivatives(surf, su.config), ConfigError);
    CHECK_THROWS_AS(bspde_residual(surf, su.market, su.config), ConfigError);
}
