#pragma once

#include <functional>
#include <memory>
#include <string>

#include "fbdual/errors.hpp"

namespace fbdual {

// Value and first three derivatives at a point.
struct Derivs {
    double value;
    double d1;
    double d2;
    double d3;
};

// A utility function U finite on all of R: strictly increasing, strictly
// concave, three times differentiable, with Inada limits U'(+inf) = 0 and
// U'(-inf) = +inf. Its convex conjugate is Uc(y) = sup_x (U(x) - x y), y > 0.
//
// Families:
//   - exponential(gamma):  U(x) = -exp(-gamma x).  Closed-form conjugate
//     Uc(y) = (y/gamma) (log(y/gamma) - 1).
//   - generic(u, u1, u2, u3): caller-supplied derivatives; the conjugate is
//     evaluated by inverting U' with safeguarded Newton (bisection fallback,
//     brackets grown geometrically from x = 0).
class UtilitySpec {
public:
    static UtilitySpec exponential(double gamma);
    static UtilitySpec generic(std::function<double(double)> u,
                               std::function<double(double)> u1,
                               std::function<double(double)> u2,
                               std::function<double(double)> u3);

    // U and derivatives. Throws DomainError on non-finite x.
    Derivs u_derivatives(double x) const;

    // Conjugate and derivatives. Throws DomainError for y <= 0.
    // Uc'(y) = -x*(y), Uc''(y) = -1/U''(x*), Uc'''(y) = U'''(x*)/U''(x*)^3,
    // where x*(y) solves U'(x) = y.
    Derivs conjugate_derivatives(double y) const;

    // Solves U'(x) = y. Exact for closed-form families; Newton otherwise
    // (|U'(x) - y| <= 1e-8 y, NumericalError with last iterate on failure).
    double inverse_marginal(double y) const;

    // Single-derivative fast paths for hot loops.
    double value(double x) const;
    double marginal(double x) const;     // U'
    double marginal2(double x) const;    // U''
    double marginal3(double x) const;    // U'''
    double conj_marginal(double y) const;   // Uc'
    double conj_marginal2(double y) const;  // Uc''

    bool is_exponential() const { return family_ == Family::exponential; }
    double gamma() const { return gamma_; }
    std::string describe() const;

private:
    enum class Family { exponential, generic };

    UtilitySpec() = default;

    Family family_ = Family::exponential;
    double gamma_ = 1.0;
    std::function<double(double)> fu_, fu1_, fu2_, fu3_;
};

} // namespace fbdual
