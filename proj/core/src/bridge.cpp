#include "fbdual/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace fbdual {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTiny = 1e-300;

double rms_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double a : v) s += a * a;
    return std::sqrt(s / v.size());
}
} // namespace

std::vector<double> y_from_marginal(std::span<const double> v_marginal, std::span<const double> x,
                                    const UtilitySpec& utility) {
    if (v_marginal.size() != x.size()) throw ConfigError("y_from_marginal: size mismatch");
    std::vector<double> y(x.size());
    long bad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(v_marginal[i] > 0.0)) {
            ++bad;
            y[i] = kNaN;
            continue;
        }
        y[i] = -utility.conj_marginal(v_marginal[i]) - x[i];
    }
    if (bad > 0)
        throw DomainError("y_from_marginal: " + std::to_string(bad) + " non-positive marginal(s)");
    return y;
}

std::vector<double> z_from_surface(std::span<const double> v_marginal,
                                   std::span<const double> v_second,
                                   std::span<const double> phi_prime, const MarketSpec& market,
                                   const UtilitySpec& utility, int* excluded) {
    const std::size_t n = v_marginal.size();
    if (v_second.size() != n || phi_prime.size() != n)
        throw ConfigError("z_from_surface: size mismatch");
    double max_vpp = 0.0;
    for (double v : v_second) max_vpp = std::max(max_vpp, std::abs(v));
    const double floor = 1e-6 * max_vpp;

    std::vector<double> z(n);
    int n_excluded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(v_marginal[i] > 0.0) || std::abs(v_second[i]) < floor || v_second[i] == 0.0) {
            z[i] = kNaN;
            ++n_excluded;
            continue;
        }
        z[i] = market.lambda * utility.conj_marginal2(v_marginal[i]) * v_marginal[i] +
               (phi_prime[i] + market.lambda * v_marginal[i]) / v_second[i];
    }
    if (excluded) *excluded = n_excluded;
    return z;
}

std::vector<double> n_from_orthogonal(std::span<const double> l_prime_increments,
                                      std::span<const double> v_marginal,
                                      const UtilitySpec& utility) {
    if (l_prime_increments.size() != v_marginal.size())
        throw ConfigError("n_from_orthogonal: size mismatch");
    std::vector<double> out(l_prime_increments.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(v_marginal[i] > 0.0)) throw DomainError("n_from_orthogonal: non-positive marginal");
        out[i] = -utility.conj_marginal2(v_marginal[i]) * l_prime_increments[i];
    }
    return out;
}

std::vector<double> p_from_y(std::span<const double> x, std::span<const double> y,
                             const UtilitySpec& utility) {
    if (x.size() != y.size()) throw ConfigError("p_from_y: size mismatch");
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        p[i] = utility.marginal(x[i] + y[i]) - utility.marginal(x[i]);
    return p;
}

std::vector<double> y_from_p(std::span<const double> x, std::span<const double> p,
                             const UtilitySpec& utility) {
    if (x.size() != p.size()) throw ConfigError("y_from_p: size mismatch");
    std::vector<double> y(x.size());
    long bad = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double marg = p[i] + utility.marginal(x[i]);
        if (!(marg > 0.0)) {
            ++bad;
            y[i] = kNaN;
            continue;
        }
        y[i] = -utility.conj_marginal(marg) - x[i];
    }
    if (bad > 0)
        throw DomainError("y_from_p: " + std::to_string(bad) + " sample(s) with P + U'(X) <= 0");
    return y;
}

DecouplingField field_from_surface(const ValueSurface& surface, DecouplingField::Kind kind,
                                   const UtilitySpec& utility) {
    const Grid2D& marginal = surface.has_marginal ? surface.vm : surface.vx;
    if (marginal.empty())
        throw ConfigError("field_from_surface: surface has neither marginal pass nor derivatives");

    DecouplingField f;
    f.kind = kind;
    f.slice_steps = surface.slice_steps;
    f.slice_times = surface.slice_times;
    f.xs = surface.xs;
    f.u = Grid2D(surface.n_slices(), surface.n_x());
    long bad = 0;
    for (int s = 0; s < surface.n_slices(); ++s) {
        for (int j = 0; j < surface.n_x(); ++j) {
            const double vp = marginal.at(s, j);
            if (kind == DecouplingField::Kind::y_field) {
                if (!(vp > 0.0)) {
                    ++bad;
                    f.u.at(s, j) = kNaN;
                    continue;
                }
                f.u.at(s, j) = -utility.conj_marginal(vp) - surface.xs[j];
            } else {
                f.u.at(s, j) = vp - utility.marginal(surface.xs[j]);
            }
        }
    }
    if (bad > 0)
        throw DomainError("field_from_surface: " + std::to_string(bad) +
                          " non-positive marginal cell(s)");
    return f;
}

namespace {

struct SliceSamples {
    // per (slice, path) flattened arrays at the surface's slice steps
    std::vector<int> slice_steps;
    std::vector<double> x, y, p, psi, l_orth, z, n_orth;
    std::vector<double> u1xy;   // U'(X+Y)
    std::vector<double> u2xy;   // U''(X+Y)
    std::vector<double> vm_s;   // surface marginal at (t, X)
    std::vector<double> vxx_s;  // surface V'' at (t, X)
    std::vector<double> phix_s; // surface phi' at (t, X)
    std::vector<double> pi_surf;
    int n_slices = 0;
    int n_paths = 0;
    int n_interior = 0;  // slices with k < n_steps (integrands defined)
};

SliceSamples gather(const FbsdeSolutionY& sy, const FbsdeSolutionP& sp,
                    const ValueSurface& surf, const Grid2D& pi_grid,
                    const UtilitySpec& utility) {
    SliceSamples g;
    g.slice_steps = surf.slice_steps;
    g.n_slices = surf.n_slices();
    g.n_paths = sy.n_paths;
    const int n_pts = sy.n_steps + 1;
    const std::size_t total = static_cast<std::size_t>(g.n_slices) * g.n_paths;
    g.x.reserve(total);

    for (int s = 0; s < g.n_slices; ++s) {
        const int k = surf.slice_steps[s];
        const bool interior = k < sy.n_steps;
        if (interior) ++g.n_interior;
        for (int p = 0; p < g.n_paths; ++p) {
            const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
            const std::size_t is = static_cast<std::size_t>(p) * sy.n_steps + std::min(k, sy.n_steps - 1);
            const double x = sy.x[ip];
            const double y = sy.y[ip];
            g.x.push_back(x);
            g.y.push_back(y);
            g.p.push_back(sp.p[ip]);
            g.psi.push_back(interior ? sp.psi[is] : 0.0);
            g.l_orth.push_back(interior ? sp.l_orth[is] : 0.0);
            g.z.push_back(interior ? sy.z[is] : 0.0);
            g.n_orth.push_back(interior ? sy.n_orth[is] : 0.0);
            g.u1xy.push_back(utility.marginal(x + y));
            g.u2xy.push_back(utility.marginal2(x + y));
            g.vm_s.push_back(interp_row_clamped(surf.xs, surf.vm.row(s), x));
            g.vxx_s.push_back(interp_row_clamped(surf.xs, surf.vxx.row(s), x));
            g.phix_s.push_back(interp_row_clamped(surf.xs, surf.phi_x.row(s), x));
            g.pi_surf.push_back(interp_row_clamped(surf.xs, pi_grid.row(s), x));
        }
    }
    return g;
}

IdentityEntry make_entry(std::string name, std::string relation, double discrepancy, double scale,
                         double tolerance, long samples, bool informational = false) {
    IdentityEntry e;
    e.name = std::move(name);
    e.relation = std::move(relation);
    e.discrepancy = discrepancy;
    e.scale = scale;
    e.tolerance = tolerance;
    e.samples = samples;
    e.informational = informational;
    e.pass = informational || discrepancy <= tolerance;
    return e;
}

} // namespace

VerificationReport identity_report(const FbsdeSolutionY& sol_y, const FbsdeSolutionP& sol_p,
                                   const ValueSurface& surface, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility, const IdentityTolerances& tol) {
    if (sol_y.ensemble_seed != ensemble.seed() || sol_p.ensemble_seed != ensemble.seed() ||
        surface.ensemble_seed != ensemble.seed() || sol_y.n_paths != ensemble.n_paths() ||
        sol_p.n_paths != ensemble.n_paths() || surface.ensemble_paths != ensemble.n_paths())
        throw ConfigError("identity_report: inputs come from different ensembles");
    if (!surface.has_marginal || !surface.has_derivatives)
        throw ConfigError("identity_report: surface needs the marginal pass and derivatives");

    const MarketSpec& market = ensemble.market();
    const bool complete = !ensemble.has_w2();
    const int n_steps = sol_y.n_steps;
    const int n_pts = n_steps + 1;
    const int n_paths = sol_y.n_paths;

    SurfaceConfig floor_cfg;  // only the V'' floor is used here
    Grid2D pi_grid = strategy_from_surface(surface, market, floor_cfg);
    SliceSamples g = gather(sol_y, sol_p, surface, pi_grid, utility);

    VerificationReport rep;
    rep.market_desc = "mu=" + std::to_string(market.mu) + " sigma=" + std::to_string(market.sigma) +
                      " lambda=" + std::to_string(market.lambda) +
                      (market.orthogonal_factor ? " w2=on" : " w2=off");
    rep.utility_desc = utility.describe();
    rep.endowment_desc = ensemble.endowment().describe();
    rep.policy_desc = surface.policy_used;
    rep.seed = ensemble.seed();
    rep.n_paths = n_paths;
    rep.n_steps = n_steps;

    const long n_samples = static_cast<long>(g.x.size());

    // (1) marginal identity: V'(t, X_t) = U'(X_t + Y_t)
    {
        std::vector<double> d(g.x.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = g.vm_s[i] - g.u1xy[i];
        const double scale = std::max(rms_of(g.u1xy), kTiny);
        rep.entries.push_back(make_entry("marginal_identity", "V'(t,X) = U'(X+Y)",
                                         rms_of(d) / scale, scale, tol.y2_rel, n_samples));
    }

    // (2) integrand identity: phi'(t,X) = (Z + lambda U'/U'') V'' - lambda U'(X+Y)
    {
        std::vector<double> d;
        std::vector<double> ref;
        for (int s = 0; s < g.n_slices; ++s) {
            const int k = g.slice_steps[s];
            if (k >= n_steps) continue;
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t i = static_cast<std::size_t>(s) * n_paths + p;
                const double rhs =
                    (g.z[i] + market.lambda * g.u1xy[i] / g.u2xy[i]) * g.vxx_s[i] -
                    market.lambda * g.u1xy[i];
                d.push_back(g.phix_s[i] - rhs);
                ref.push_back(market.lambda * g.u1xy[i]);
            }
        }
        const double scale = std::max(rms_of(ref), kTiny);
        rep.entries.push_back(make_entry(
            "integrand_identity", "phi'(t,X) = (Z + lambda U'/U'') V'' - lambda U'(X+Y)",
            rms_of(d) / scale, scale, tol.y3_rel, static_cast<long>(d.size())));
    }

    // (3) orthogonal-part identity
    if (complete) {
        // degenerate form: orthogonal integrands vanish with the factor off
        std::vector<double> l_all(sol_p.l_orth.begin(), sol_p.l_orth.end());
        std::vector<double> psi_all(sol_p.psi.begin(), sol_p.psi.end());
        const double scale = std::max(rms_of(psi_all), kTiny);
        rep.entries.push_back(make_entry("orthogonal_identity",
                                         "complete market: l_orth = 0 (vs M-integrand scale)",
                                         rms_of(l_all) / scale, scale, tol.complete_orth_rel,
                                         static_cast<long>(l_all.size())));
    } else {
        // dL' = U''(X+Y) dN with N re-extracted from the Y increments by regression
        std::vector<double> d, ref;
        std::vector<double> incr(n_paths), dm(n_paths), dw2(n_paths);
        for (int k = 0; k < n_steps; ++k) {
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t b = static_cast<std::size_t>(p) * n_pts + k;
                incr[p] = sol_y.y[b + 1] - sol_y.y[b];
                dm[p] = ensemble.dm(p, k);
                dw2[p] = ensemble.dw2(p, k);
            }
            StateColumns states{{sol_y.x.data() + k, n_pts}};
            if (ensemble.endowment().kind() == EndowmentSpec::Kind::tanh_w2)
                states.push_back({ensemble.w2_data() + k, n_pts});
            BasisSpec basis;  // default cubic
            const auto fit = fit_step_integrands(incr, dm, dw2, states, basis);
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
                const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
                const double u2 = utility.marginal2(sol_y.x[ip] + sol_y.y[ip]);
                d.push_back(sol_p.l_orth[is] - u2 * fit.psi_orth[p]);
                ref.push_back(sol_p.l_orth[is]);
            }
        }
        const double scale = std::max(rms_of(ref), kTiny);
        rep.entries.push_back(make_entry("orthogonal_identity", "dL'(t,X) = U''(X+Y) dN",
                                         rms_of(d) / scale, scale, tol.y4_rel,
                                         static_cast<long>(d.size())));
    }

    // (4) martingale property of U'(X_t + Y_t)
    {
        double worst = 0.0;
        for (int s = 1; s < g.n_slices; ++s) {
            double mean = 0.0, var = 0.0;
            std::vector<double> diff(n_paths);
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t i0 = static_cast<std::size_t>(0) * n_paths + p;
                const std::size_t i = static_cast<std::size_t>(s) * n_paths + p;
                diff[p] = g.u1xy[i] - g.u1xy[i0];
                mean += diff[p];
            }
            mean /= n_paths;
            for (int p = 0; p < n_paths; ++p) var += (diff[p] - mean) * (diff[p] - mean);
            var = n_paths > 1 ? var / (n_paths - 1) : 0.0;
            const double se = std::sqrt(var / n_paths);
            const double z = se > 0.0 ? std::abs(mean) / se : (mean == 0.0 ? 0.0 : 1e30);
            worst = std::max(worst, z);
        }
        rep.entries.push_back(make_entry("martingale_marginal",
                                         "E U'(X_t + Y_t) constant in t (z-score)", worst, 1.0,
                                         tol.martingale_z, n_samples));
    }

    // (5) local-martingale decomposition of V'(t, X_t): dM-integrand = -lambda V'
    {
        std::vector<double> d, ref;
        std::vector<double> incr(n_paths), dm_s(n_paths), dw2_s;
        if (!complete) dw2_s.resize(n_paths);
        for (int s = 0; s + 1 < g.n_slices; ++s) {
            const int k0 = g.slice_steps[s];
            const int k1 = g.slice_steps[s + 1];
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t i0 = static_cast<std::size_t>(s) * n_paths + p;
                const std::size_t i1 = static_cast<std::size_t>(s + 1) * n_paths + p;
                incr[p] = g.vm_s[i1] - g.vm_s[i0];
                dm_s[p] = ensemble.m(p, k1) - ensemble.m(p, k0);
                if (!complete) dw2_s[p] = ensemble.w2(p, k1) - ensemble.w2(p, k0);
            }
            StateColumns states{{sol_y.x.data() + k0, n_pts}};
            BasisSpec basis;
            const auto fit = fit_step_integrands(incr, dm_s, dw2_s, states, basis);
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t i0 = static_cast<std::size_t>(s) * n_paths + p;
                d.push_back(fit.psi[p] + market.lambda * g.vm_s[i0]);
                ref.push_back(market.lambda * g.vm_s[i0]);
            }
        }
        const double scale = std::max(rms_of(ref), kTiny);
        rep.entries.push_back(make_entry("marginal_decomposition",
                                         "dV'(t,X) = -lambda V' dM + orthogonal part",
                                         rms_of(d) / scale, scale, tol.op_decomposition_rel,
                                         static_cast<long>(d.size())));
    }

    // (6) duality ratio U'(X_T + H) / rho_T
    {
        const DensityProcess rho = density_process(ensemble, market);
        std::vector<double> ratio(n_paths);
        for (int p = 0; p < n_paths; ++p) {
            const std::size_t it = static_cast<std::size_t>(p) * n_pts + n_steps;
            ratio[p] = utility.marginal(sol_y.x[it] + ensemble.endowment_value(p)) /
                       rho.rho_terminal(p);
        }
        double mean = 0.0;
        for (double r : ratio) mean += r;
        mean /= n_paths;
        double var = 0.0;
        for (double r : ratio) var += (r - mean) * (r - mean);
        var = n_paths > 1 ? var / (n_paths - 1) : 0.0;
        const double cv = std::abs(mean) > 0.0 ? std::sqrt(var) / std::abs(mean) : 0.0;
        // Sharp only when the exponential-of--lambda.M density is the optimal
        // one, i.e. in the complete market; informational otherwise.
        rep.entries.push_back(make_entry("duality_ratio",
                                         "U'(X_T + H) = y rho_T (coefficient of variation)", cv,
                                         std::abs(mean), tol.duality_cv, n_paths, !complete));
    }

    // (7) three-way strategy equivalence
    {
        std::vector<double> d_sy, d_sp, d_yp, ref;
        for (int s = 0; s < g.n_slices; ++s) {
            const int k = g.slice_steps[s];
            if (k >= n_steps) continue;
            for (int p = 0; p < n_paths; ++p) {
                const std::size_t i = static_cast<std::size_t>(s) * n_paths + p;
                const double pi_y = strategy_from_y(g.x[i], g.y[i], g.z[i], market, utility);
                const double pi_p = strategy_from_p(g.x[i], g.p[i], g.psi[i], market, utility);
                const double pi_s = g.pi_surf[i];
                if (std::isfinite(pi_s)) {
                    d_sy.push_back(pi_s - pi_y);
                    d_sp.push_back(pi_s - pi_p);
                }
                d_yp.push_back(pi_y - pi_p);
                ref.push_back(pi_p);
            }
        }
        const double scale = std::max(rms_of(ref), kTiny);
        const double spread = std::max({rms_of(d_sy), rms_of(d_sp), rms_of(d_yp)});
        rep.entries.push_back(make_entry(
            "strategy_threeway", "pi from surface = pi from (Y,Z) = pi from (P,psi)",
            spread / scale, scale, tol.strategy_spread_rel, static_cast<long>(ref.size())));
    }

    // (8) corollary round-trip
    {
        double worst = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i) {
            const double p_mapped = utility.marginal(g.x[i] + g.y[i]) - utility.marginal(g.x[i]);
            const double marg1 = p_mapped + utility.marginal(g.x[i]);
            if (marg1 > 0.0) {
                const double y_back = -utility.conj_marginal(marg1) - g.x[i];
                worst = std::max(worst, std::abs(y_back - g.y[i]) / (1.0 + std::abs(g.y[i])));
            }
            const double marg2 = g.p[i] + utility.marginal(g.x[i]);
            if (marg2 > 0.0) {
                const double y_mid = -utility.conj_marginal(marg2) - g.x[i];
                const double p_back =
                    utility.marginal(g.x[i] + y_mid) - utility.marginal(g.x[i]);
                worst = std::max(worst, std::abs(p_back - g.p[i]) / (1.0 + std::abs(g.p[i])));
            }
        }
        rep.entries.push_back(make_entry("corollary_roundtrip",
                                         "Y <-> P = U'(X+Y) - U'(X) (max relative error)", worst,
                                         1.0, tol.roundtrip_rel, n_samples));
    }

    // (9) informational: gap between the two printed evaluations of Z
    {
        std::vector<double> d;
        for (std::size_t i = 0; i < g.vm_s.size(); ++i) {
            if (!(g.vm_s[i] > 0.0)) continue;
            const double stmt = utility.conjugate_derivatives(g.vm_s[i]).d1;
            const double proof = utility.conj_marginal2(g.vm_s[i]) * g.vm_s[i];
            d.push_back(market.lambda * (stmt - proof));
        }
        rep.entries.push_back(make_entry(
            "z_alternative_evaluation",
            "gap between Z = lambda Uc'(V') + ... and Z = lambda Uc''(V') V' + ...", rms_of(d),
            1.0, 0.0, static_cast<long>(d.size()), true));
    }

    // (10) informational: dual value at y = E U'(X_T + H), endowment term omitted
    {
        double y_hat = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            const std::size_t it = static_cast<std::size_t>(p) * n_pts + n_steps;
            y_hat += utility.marginal(sol_y.x[it] + ensemble.endowment_value(p));
        }
        y_hat /= n_paths;
        const DensityProcess rho = density_process(ensemble, market);
        const MonteCarloEstimate est = dual_value_estimate(y_hat, rho, utility);
        IdentityEntry e = make_entry("dual_value_endowment_term_omitted",
                                     "E[Uc(y rho_T) + y rho_T] at y = E U'(X_T+H)", est.value,
                                     est.std_error, 0.0, est.n_samples, true);
        e.pass = true;
        rep.entries.push_back(e);
    }

    return rep;
}

std::string VerificationReport::to_json() const {
    nlohmann::json j;
    j["market"] = market_desc;
    j["utility"] = utility_desc;
    j["endowment"] = endowment_desc;
    j["policy"] = policy_desc;
    j["seed"] = seed;
    j["n_paths"] = n_paths;
    j["n_steps"] = n_steps;
    j["overall_pass"] = overall_pass();
    j["identities"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json je;
        je["name"] = e.name;
        je["relation"] = e.relation;
        je["discrepancy"] = e.discrepancy;
        je["scale"] = e.scale;
        je["tolerance"] = e.tolerance;
        je["pass"] = e.pass;
        je["informational"] = e.informational;
        je["samples"] = e.samples;
        j["identities"].push_back(je);
    }
    return j.dump(2);
}

std::string VerificationReport::to_table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-34s %12s %12s %10s  %s\n", "identity", "discrepancy",
                  "tolerance", "samples", "status");
    os << line;
    os << std::string(84, '-') << "\n";
    for (const auto& e : entries) {
        std::snprintf(line, sizeof(line), "%-34s %12.4e %12.4e %10ld  %s\n", e.name.c_str(),
                      e.discrepancy, e.tolerance, e.samples,
                      e.informational ? "INFO" : (e.pass ? "PASS" : "FAIL"));
        os << line;
    }
    os << std::string(84, '-') << "\n";
    os << "overall: " << (overall_pass() ? "PASS" : "FAIL") << "\n";
    return os.str();
}

} // namespace fbdual
