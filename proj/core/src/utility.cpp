#include "fbdual/utility.hpp"

#include <cmath>
#include <limits>

namespace fbdual {

UtilitySpec UtilitySpec::exponential(double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("UtilitySpec: gamma must be positive");
    UtilitySpec s;
    s.family_ = Family::exponential;
    s.gamma_ = gamma;
    return s;
}

UtilitySpec UtilitySpec::generic(std::function<double(double)> u,
                                 std::function<double(double)> u1,
                                 std::function<double(double)> u2,
                                 std::function<double(double)> u3) {
    UtilitySpec s;
    s.family_ = Family::generic;
    s.fu_ = std::move(u);
    s.fu1_ = std::move(u1);
    s.fu2_ = std::move(u2);
    s.fu3_ = std::move(u3);
    return s;
}

Derivs UtilitySpec::u_derivatives(double x) const {
    if (!std::isfinite(x)) throw DomainError("u_derivatives: x must be finite");
    if (family_ == Family::exponential) {
        const double e = std::exp(-gamma_ * x);
        return {-e, gamma_ * e, -gamma_ * gamma_ * e, gamma_ * gamma_ * gamma_ * e};
    }
    return {fu_(x), fu1_(x), fu2_(x), fu3_(x)};
}

double UtilitySpec::value(double x) const {
    if (family_ == Family::exponential) return -std::exp(-gamma_ * x);
    return fu_(x);
}

double UtilitySpec::marginal(double x) const {
    if (family_ == Family::exponential) return gamma_ * std::exp(-gamma_ * x);
    return fu1_(x);
}

double UtilitySpec::marginal2(double x) const {
    if (family_ == Family::exponential) return -gamma_ * gamma_ * std::exp(-gamma_ * x);
    return fu2_(x);
}

double UtilitySpec::marginal3(double x) const {
    if (family_ == Family::exponential) return gamma_ * gamma_ * gamma_ * std::exp(-gamma_ * x);
    return fu3_(x);
}

double UtilitySpec::inverse_marginal(double y) const {
    if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("inverse_marginal: y must be positive and finite");
    if (family_ == Family::exponential) {
        return -std::log(y / gamma_) / gamma_;
    }

    // U' is strictly decreasing; bracket the root growing geometrically from 0.
    double lo = 0.0, hi = 0.0;
    double step = 1.0;
    if (fu1_(0.0) >= y) {
        lo = 0.0;
        hi = step;
        while (fu1_(hi) > y) {
            lo = hi;
            step *= 2.0;
            hi += step;
            if (hi > 1e12) throw NumericalError("inverse_marginal: failed to bracket root above", lo);
        }
    } else {
        hi = 0.0;
        lo = -step;
        while (fu1_(lo) < y) {
            hi = lo;
            step *= 2.0;
            lo -= step;
            if (lo < -1e12) throw NumericalError("inverse_marginal: failed to bracket root below", hi);
        }
    }

    double x = 0.5 * (lo + hi);
    const int max_iter = 100;
    for (int it = 0; it < max_iter; ++it) {
        const double f = fu1_(x) - y;
        if (std::abs(f) <= 1e-8 * y) return x;
        if (f > 0.0) lo = x; else hi = x;  // decreasing U'
        const double d = fu2_(x);
        double x_new = x - f / d;
        if (!(x_new > lo) || !(x_new < hi) || !std::isfinite(x_new))
            x_new = 0.5 * (lo + hi);  // bisection safeguard
        x = x_new;
    }
    if (std::abs(fu1_(x) - y) <= 1e-8 * y) return x;
    throw NumericalError("inverse_marginal: Newton did not converge", x);
}

Derivs UtilitySpec::conjugate_derivatives(double y) const {
    if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("conjugate_derivatives: y must be positive and finite");
    if (family_ == Family::exponential) {
        const double w = y / gamma_;
        const double lw = std::log(w);
        return {w * (lw - 1.0), lw / gamma_, 1.0 / (gamma_ * y), -1.0 / (gamma_ * y * y)};
    }
    const double xs = inverse_marginal(y);
    const double u = fu_(xs);
    const double u2 = fu2_(xs);
    const double u3 = fu3_(xs);
    return {u - xs * y, -xs, -1.0 / u2, u3 / (u2 * u2 * u2)};
}

double UtilitySpec::conj_marginal(double y) const {
    if (family_ == Family::exponential) return std::log(y / gamma_) / gamma_;
    return -inverse_marginal(y);
}

double UtilitySpec::conj_marginal2(double y) const {
    if (family_ == Family::exponential) return 1.0 / (gamma_ * y);
    return -1.0 / fu2_(inverse_marginal(y));
}

std::string UtilitySpec::describe() const {
    if (family_ == Family::exponential) return "exponential(gamma=" + std::to_string(gamma_) + ")";
    return "generic";
}

} // namespace fbdual
