#include "fbdual/market.hpp"

#include <cmath>

#include "fbdual/parallel.hpp"
#include "fbdual/rng.hpp"

namespace fbdual {

std::string EndowmentSpec::describe() const {
    switch (kind_) {
        case Kind::constant: return "constant(" + std::to_string(param_) + ")";
        case Kind::tanh_w1: return "tanh_w1(scale=" + std::to_string(param_) + ")";
        case Kind::tanh_w2: return "tanh_w2(scale=" + std::to_string(param_) + ")";
    }
    return "?";
}

PathEnsemble::PathEnsemble(const MarketSpec& market, const TimeGrid& grid,
                           const EndowmentSpec& endowment, int n_paths, std::uint64_t seed)
    : market_(market), grid_(grid), endowment_(endowment), n_paths_(n_paths), seed_(seed),
      has_w2_(market.orthogonal_factor) {
    if (n_paths < 1) throw ConfigError("PathEnsemble: n_paths must be >= 1");
    if (!(market.sigma > 0.0)) throw ConfigError("PathEnsemble: sigma must be positive");
    if (endowment.needs_w2() && !has_w2_)
        throw ConfigError("PathEnsemble: endowment depends on W2 but the orthogonal factor is off");

    const int n_pts = grid.n_points();
    const double sqrt_dt = std::sqrt(grid.dt());
    w1_.resize(static_cast<std::size_t>(n_paths) * n_pts);
    if (has_w2_) w2_.resize(static_cast<std::size_t>(n_paths) * n_pts);
    h_.resize(n_paths);

    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
        const std::size_t base = p * n_pts;
        w1_[base] = 0.0;
        if (has_w2_) w2_[base] = 0.0;
        for (int k = 0; k < grid.n_steps(); ++k) {
            w1_[base + k + 1] = w1_[base + k] + sqrt_dt * rng::normal(seed_, p, k, 0);
            if (has_w2_)
                w2_[base + k + 1] = w2_[base + k] + sqrt_dt * rng::normal(seed_, p, k, 1);
        }
        h_[p] = endowment.evaluate(w1_[base + grid.n_steps()],
                                   has_w2_ ? w2_[base + grid.n_steps()] : 0.0);
    });
}

PathEnsemble simulate_paths(const MarketSpec& market, const TimeGrid& grid,
                            const EndowmentSpec& endowment, int n_paths, std::uint64_t seed) {
    return PathEnsemble(market, grid, endowment, n_paths, seed);
}

DensityProcess density_process(const PathEnsemble& paths, const MarketSpec& market,
                               const std::vector<double>* orthogonal_integrand) {
    const int n_pts = paths.grid().n_points();
    const int n_steps = paths.grid().n_steps();
    const double lambda = market.lambda;
    const double dqv = paths.dqv();
    const double dt = paths.grid().dt();

    if (orthogonal_integrand) {
        if (!paths.has_w2())
            throw ConfigError("density_process: orthogonal integrand given but W2 is off");
        if (orthogonal_integrand->size() !=
            static_cast<std::size_t>(paths.n_paths()) * n_steps)
            throw ConfigError("density_process: orthogonal integrand size mismatch");
    }

    std::vector<double> rho(static_cast<std::size_t>(paths.n_paths()) * n_pts);
    parallel_for(static_cast<std::size_t>(paths.n_paths()), [&](std::size_t p) {
        double log_rho = 0.0;
        rho[p * n_pts] = 1.0;
        for (int k = 0; k < n_steps; ++k) {
            log_rho += -lambda * paths.dm(static_cast<int>(p), k) - 0.5 * lambda * lambda * dqv;
            if (orthogonal_integrand) {
                const double d = (*orthogonal_integrand)[p * n_steps + k];
                log_rho += d * paths.dw2(static_cast<int>(p), k) - 0.5 * d * d * dt;
            }
            rho[p * n_pts + k + 1] = std::exp(log_rho);
        }
    });
    return DensityProcess(std::move(rho), paths.n_paths(), n_pts, lambda,
                          orthogonal_integrand != nullptr);
}

MonteCarloEstimate dual_value_estimate(double y, const DensityProcess& density,
                                       const UtilitySpec& utility) {
    if (!(y > 0.0)) throw DomainError("dual_value_estimate: y must be positive");
    MonteCarloEstimate est;
    double sum = 0.0, sum_sq = 0.0;
    long n_ok = 0, n_flagged = 0;
    for (int p = 0; p < density.n_paths(); ++p) {
        const double yr = y * density.rho_terminal(p);
        double v;
        if (yr > 0.0 && std::isfinite(yr)) {
            v = utility.conjugate_derivatives(yr).value + yr;
        } else {
            v = std::numeric_limits<double>::quiet_NaN();
        }
        if (std::isfinite(v)) {
            sum += v;
            sum_sq += v * v;
            ++n_ok;
        } else {
            ++n_flagged;
        }
    }
    est.n_samples = n_ok;
    est.n_flagged = n_flagged;
    if (n_ok > 0) {
        est.value = sum / n_ok;
        if (n_ok > 1) {
            const double var = std::max(0.0, (sum_sq - sum * sum / n_ok) / (n_ok - 1));
            est.std_error = std::sqrt(var / n_ok);
        }
    }
    return est;
}

} // namespace fbdual
