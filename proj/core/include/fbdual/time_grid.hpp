#pragma once

#include <vector>

#include "fbdual/errors.hpp"

namespace fbdual {

// Uniform grid 0 = t_0 < t_1 < ... < t_n = T.
class TimeGrid {
public:
    TimeGrid(double horizon, int n_steps) : horizon_(horizon), n_steps_(n_steps) {
        if (!(horizon > 0.0)) throw ConfigError("TimeGrid: horizon must be positive");
        if (n_steps < 1) throw ConfigError("TimeGrid: n_steps must be >= 1");
        dt_ = horizon_ / n_steps_;
    }

    double horizon() const { return horizon_; }
    int n_steps() const { return n_steps_; }
    int n_points() const { return n_steps_ + 1; }
    double dt() const { return dt_; }
    double t(int k) const { return k == n_steps_ ? horizon_ : k * dt_; }

    std::vector<double> points() const {
        std::vector<double> p(n_points());
        for (int k = 0; k < n_points(); ++k) p[k] = t(k);
        return p;
    }

private:
    double horizon_;
    int n_steps_;
    double dt_;
};

} // namespace fbdual
