#include "fbdual/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fbdual {

PolicyField PolicyField::constant(double value) {
    PolicyField f;
    f.kind_ = Kind::constant;
    f.value_ = value;
    return f;
}

PolicyField PolicyField::myopic(const MarketSpec& market, const UtilitySpec& utility) {
    PolicyField f;
    f.kind_ = Kind::myopic;
    f.market_ = market;
    f.utility_ = utility;
    return f;
}

PolicyField PolicyField::per_step_fit(std::vector<ConditionalEstimator> per_step) {
    PolicyField f;
    f.kind_ = Kind::per_step_fit;
    f.per_step_ = std::move(per_step);
    return f;
}

PolicyField PolicyField::grid(std::vector<int> slice_steps, std::vector<double> xs,
                              std::vector<double> values) {
    PolicyField f;
    f.kind_ = Kind::grid;
    f.slice_steps_ = std::move(slice_steps);
    f.xs_ = std::move(xs);
    f.grid_values_ = std::move(values);
    return f;
}

double interp_row_clamped(const std::vector<double>& xs, const double* row, double x) {
    const int n = static_cast<int>(xs.size());
    auto finite_near = [&](int j, int dir) {
        while (j >= 0 && j < n && !std::isfinite(row[j])) j += dir;
        return j;
    };
    if (x <= xs.front()) {
        const int j = finite_near(0, +1);
        return j < n ? row[j] : std::numeric_limits<double>::quiet_NaN();
    }
    if (x >= xs.back()) {
        const int j = finite_near(n - 1, -1);
        return j >= 0 ? row[j] : std::numeric_limits<double>::quiet_NaN();
    }
    int hi = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    int lo = hi - 1;
    double vl = row[lo], vh = row[hi];
    if (!std::isfinite(vl)) {
        const int j = finite_near(lo, -1);
        vl = j >= 0 ? row[j] : vh;
    }
    if (!std::isfinite(vh)) {
        const int j = finite_near(hi, +1);
        vh = j < n ? row[j] : vl;
    }
    const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return (1.0 - w) * vl + w * vh;
}

double PolicyField::evaluate(int step, double x) const {
    switch (kind_) {
        case Kind::constant:
            return value_;
        case Kind::myopic:
            return -market_.lambda * utility_.marginal(x) / utility_.marginal2(x);
        case Kind::per_step_fit: {
            const int k = std::clamp(step, 0, static_cast<int>(per_step_.size()) - 1);
            return per_step_[k].evaluate({x});
        }
        case Kind::grid: {
            // nearest slice at or before `step`
            int s = 0;
            while (s + 1 < static_cast<int>(slice_steps_.size()) && slice_steps_[s + 1] <= step) ++s;
            const double* row = grid_values_.data() + static_cast<std::size_t>(s) * xs_.size();
            return interp_row_clamped(xs_, row, x);
        }
    }
    return 0.0;
}

std::string PolicyField::describe() const {
    switch (kind_) {
        case Kind::constant: return "constant(" + std::to_string(value_) + ")";
        case Kind::myopic: return "myopic";
        case Kind::per_step_fit: return "per_step_fit";
        case Kind::grid: return "grid";
    }
    return "?";
}

} // namespace fbdual
