#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fbdual/errors.hpp"
#include "fbdual/time_grid.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// One-asset Bachelier market written in structure-condition form:
//   M_t = sigma W1_t,   S_t = M_t + lambda <M>_t,   <M>_t = sigma^2 t,
// so the drift of S is mu = lambda sigma^2. An optional second Brownian
// factor W2 is independent of W1 and drives only the endowment; with it off
// the market is complete.
struct MarketSpec {
    double mu = 0.0;
    double sigma = 0.0;
    double lambda = 0.0;             // mu / sigma^2, stored
    bool orthogonal_factor = false;  // enable W2

    // d<M>/dt (the density of the bracket against the calendar clock).
    double covariance_rate() const { return sigma * sigma; }

    // Canonicalizes mu = lambda sigma^2 so the structure identity is exact in
    // floating point.
    static MarketSpec make(double mu, double sigma, bool orthogonal_factor = false) {
        if (!(sigma > 0.0)) throw ConfigError("MarketSpec: sigma must be positive");
        MarketSpec m;
        m.sigma = sigma;
        m.lambda = mu / (sigma * sigma);
        m.mu = m.lambda * (sigma * sigma);
        m.orthogonal_factor = orthogonal_factor;
        return m;
    }
};

// Bounded terminal endowment H. Kinds: a constant, a bounded function of the
// terminal traded factor, or a bounded function of the terminal orthogonal
// factor (scale * tanh of the factor in both function cases).
class EndowmentSpec {
public:
    enum class Kind { constant, tanh_w1, tanh_w2 };

    static EndowmentSpec constant(double h) { return EndowmentSpec(Kind::constant, h); }
    static EndowmentSpec tanh_of_w1(double scale) { return EndowmentSpec(Kind::tanh_w1, scale); }
    static EndowmentSpec tanh_of_w2(double scale) { return EndowmentSpec(Kind::tanh_w2, scale); }

    Kind kind() const { return kind_; }
    double parameter() const { return param_; }
    bool needs_w2() const { return kind_ == Kind::tanh_w2; }
    bool deterministic() const { return kind_ == Kind::constant; }
    double bound() const { return std::abs(param_); }

    double evaluate(double w1_terminal, double w2_terminal) const {
        switch (kind_) {
            case Kind::constant: return param_;
            case Kind::tanh_w1: return param_ * std::tanh(w1_terminal);
            case Kind::tanh_w2: return param_ * std::tanh(w2_terminal);
        }
        return 0.0;
    }

    std::string describe() const;

private:
    EndowmentSpec(Kind k, double p) : kind_(k), param_(p) {}
    Kind kind_;
    double param_;
};

// Simulated bundle of Brownian paths on a TimeGrid with derived market
// processes. Storage holds W1 (and W2 when enabled) plus terminal endowment
// values; M, S and their increments are exact functions of those and are
// exposed as accessors. Immutable after construction.
class PathEnsemble {
public:
    PathEnsemble(const MarketSpec& market, const TimeGrid& grid, const EndowmentSpec& endowment,
                 int n_paths, std::uint64_t seed);

    const MarketSpec& market() const { return market_; }
    const TimeGrid& grid() const { return grid_; }
    int n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    bool has_w2() const { return has_w2_; }

    double w1(int path, int k) const { return w1_[idx(path, k)]; }
    double w2(int path, int k) const { return has_w2_ ? w2_[idx(path, k)] : 0.0; }
    // Raw path-major storage (stride = n_points) for strided state views.
    const double* w1_data() const { return w1_.data(); }
    const double* w2_data() const { return has_w2_ ? w2_.data() : nullptr; }
    const EndowmentSpec& endowment() const { return endowment_; }
    double m(int path, int k) const { return market_.sigma * w1(path, k); }
    double s(int path, int k) const { return m(path, k) + market_.mu * grid_.t(k); }
    double dm(int path, int k) const { return m(path, k + 1) - m(path, k); }
    double dw1(int path, int k) const { return w1(path, k + 1) - w1(path, k); }
    double dw2(int path, int k) const { return has_w2_ ? w2(path, k + 1) - w2(path, k) : 0.0; }
    double ds(int path, int k) const { return dm(path, k) + market_.mu * grid_.dt(); }
    // Delta <M> per step: deterministic sigma^2 dt.
    double dqv() const { return market_.covariance_rate() * grid_.dt(); }
    double endowment_value(int path) const { return h_[path]; }

    const std::vector<double>& endowment_values() const { return h_; }

private:
    std::size_t idx(int path, int k) const {
        return static_cast<std::size_t>(path) * grid_.n_points() + k;
    }

    MarketSpec market_;
    TimeGrid grid_;
    EndowmentSpec endowment_;
    int n_paths_;
    std::uint64_t seed_;
    bool has_w2_;
    std::vector<double> w1_, w2_, h_;
};

// Density process rho of an absolutely continuous measure change generated by
// the integrand -lambda against M plus an optional integrand against W2:
//   rho_t = exp(-int lambda dM - 1/2 int lambda^2 d<M>
//               + int d dW2 - 1/2 int d^2 dt).
class DensityProcess {
public:
    DensityProcess(std::vector<double> rho, int n_paths, int n_points, double lambda,
                   bool has_orthogonal)
        : rho_(std::move(rho)), n_paths_(n_paths), n_points_(n_points), lambda_(lambda),
          has_orthogonal_(has_orthogonal) {}

    double rho(int path, int k) const {
        return rho_[static_cast<std::size_t>(path) * n_points_ + k];
    }
    double rho_terminal(int path) const { return rho(path, n_points_ - 1); }
    int n_paths() const { return n_paths_; }
    int n_points() const { return n_points_; }
    double lambda() const { return lambda_; }
    bool has_orthogonal_integrand() const { return has_orthogonal_; }

private:
    std::vector<double> rho_;
    int n_paths_;
    int n_points_;
    double lambda_;
    bool has_orthogonal_;
};

// Monte Carlo estimate with its standard error.
struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_samples = 0;
    long n_flagged = 0;  // non-finite contributions, excluded from the mean
};

// Simulates the path bundle. Throws ConfigError for non-positive sigma,
// n_steps or n_paths. Deterministic in (market, grid, endowment, n_paths,
// seed) regardless of threading.
PathEnsemble simulate_paths(const MarketSpec& market, const TimeGrid& grid,
                            const EndowmentSpec& endowment, int n_paths, std::uint64_t seed);

// Density process with generating integrand -lambda against M (and an
// optional per-path-per-step orthogonal integrand against W2).
DensityProcess density_process(const PathEnsemble& paths, const MarketSpec& market,
                               const std::vector<double>* orthogonal_integrand = nullptr);

// Monte Carlo estimate of E[Uc(y rho_T) + y rho_T] for the given density.
// The endowment does not enter the integrand; outputs are labelled
// accordingly where reported.
MonteCarloEstimate dual_value_estimate(double y, const DensityProcess& density,
                                       const UtilitySpec& utility);

} // namespace fbdual
