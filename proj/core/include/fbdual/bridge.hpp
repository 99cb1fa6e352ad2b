#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fbdual/fbsde.hpp"
#include "fbdual/market.hpp"
#include "fbdual/surface.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// --- transformation maps between the surface and the two FBSDE systems ---

// Y_t = -Uc'(V'(t, X_t)) - X_t. Throws DomainError on non-positive marginals.
std::vector<double> y_from_marginal(std::span<const double> v_marginal, std::span<const double> x,
                                    const UtilitySpec& utility);

// Z = lambda Uc''(V') V' + (phi' + lambda V') / V''  (the route consistent
// with the forward equation; see identity_report for the alternative
// evaluation it prints alongside). Cells with |V''| below the floor are
// excluded (NaN) and counted.
std::vector<double> z_from_surface(std::span<const double> v_marginal,
                                   std::span<const double> v_second,
                                   std::span<const double> phi_prime, const MarketSpec& market,
                                   const UtilitySpec& utility, int* excluded = nullptr);

// N increments: dN = -Uc''(V') dL_line.
std::vector<double> n_from_orthogonal(std::span<const double> l_prime_increments,
                                      std::span<const double> v_marginal,
                                      const UtilitySpec& utility);

// Corollary pair: P = U'(X+Y) - U'(X) and Y = -Uc'(P + U'(X)) - X.
std::vector<double> p_from_y(std::span<const double> x, std::span<const double> y,
                             const UtilitySpec& utility);
// Throws DomainError (with the offending count in the message) when
// P + U'(X) <= 0 anywhere.
std::vector<double> y_from_p(std::span<const double> x, std::span<const double> p,
                             const UtilitySpec& utility);

// Decoupling fields read off the surface:
//   y_field  u(t,x) = -Uc'(V'(t,x)) - x
//   p_field  u(t,x) = V'(t,x) - U'(x)
// Uses the restart-estimated marginal when present, the x-differenced one
// otherwise.
DecouplingField field_from_surface(const ValueSurface& surface, DecouplingField::Kind kind,
                                   const UtilitySpec& utility);

// --- verification report ---

struct IdentityTolerances {
    double y2_rel = 0.05;
    double y3_rel = 0.10;
    double y4_rel = 0.10;
    double strategy_spread_rel = 0.05;
    double roundtrip_rel = 1e-10;
    double duality_cv = 0.02;
    double martingale_z = 3.0;
    double op_decomposition_rel = 0.10;
    double complete_orth_rel = 0.05;
};

struct IdentityEntry {
    std::string name;
    std::string relation;  // the checked relation, written out
    double discrepancy = 0.0;
    double scale = 1.0;
    double tolerance = 0.0;
    bool pass = true;
    bool informational = false;
    long samples = 0;
};

struct VerificationReport {
    std::vector<IdentityEntry> entries;
    std::string market_desc, utility_desc, endowment_desc, policy_desc;
    std::uint64_t seed = 0;
    int n_paths = 0;
    int n_steps = 0;

    bool overall_pass() const {
        for (const auto& e : entries)
            if (!e.informational && !e.pass) return false;
        return true;
    }
    std::string to_json() const;
    std::string to_table() const;
};

// Cross-checks one consistent run: solutions of both systems, the value
// surface (with marginal pass), and the ensemble they were produced from.
// Throws ConfigError when the inputs do not come from the same ensemble.
VerificationReport identity_report(const FbsdeSolutionY& sol_y, const FbsdeSolutionP& sol_p,
                                   const ValueSurface& surface, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility, const IdentityTolerances& tol);

} // namespace fbdual
