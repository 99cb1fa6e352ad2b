#pragma once

#include <string>
#include <vector>

#include "fbdual/market.hpp"
#include "fbdual/regression.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// A trading-strategy field pi(step, x). Variants:
//   constant      pi(t, x) = c
//   myopic        pi(t, x) = -lambda U'(x) / U''(x)
//   per_step_fit  per-step polynomial in wealth (fitted from solver output)
//   grid          values on (slice, x) cells, nearest slice in t, linear in x
class PolicyField {
public:
    static PolicyField constant(double value);
    static PolicyField myopic(const MarketSpec& market, const UtilitySpec& utility);
    static PolicyField per_step_fit(std::vector<ConditionalEstimator> per_step);
    static PolicyField grid(std::vector<int> slice_steps, std::vector<double> xs,
                            std::vector<double> values /* slice-major */);

    double evaluate(int step, double x) const;
    std::string describe() const;

private:
    enum class Kind { constant, myopic, per_step_fit, grid };
    PolicyField() = default;

    Kind kind_ = Kind::constant;
    double value_ = 0.0;
    MarketSpec market_{};
    UtilitySpec utility_ = UtilitySpec::exponential(1.0);
    std::vector<ConditionalEstimator> per_step_;
    std::vector<int> slice_steps_;
    std::vector<double> xs_;
    std::vector<double> grid_values_;
};

// Linear interpolation in x with clamping at the grid edges; NaN cells are
// skipped in favour of the nearest finite cell in the row.
double interp_row_clamped(const std::vector<double>& xs, const double* row, double x);

} // namespace fbdual
