#include "fbdual/fbsde.hpp"

#include <algorithm>
#include <cmath>

#include "fbdual/parallel.hpp"

namespace fbdual {

double generator_y(double x, double y, double z, double n_rate, const MarketSpec& market,
                   const UtilitySpec& utility) {
    const double w = x + y;
    const double u1 = utility.marginal(w);
    const double u2 = utility.marginal2(w);
    const double u3 = utility.marginal3(w);
    const double lam = market.lambda;
    const double c = market.covariance_rate();
    const double drift_part =
        (lam * u1 / u2 - 0.5 * lam * u3 * u1 * u1 / (u2 * u2 * u2) + z) * c * lam;
    return drift_part - 0.5 * (u3 / u2) * n_rate;
}

double generator_p(double x, double p, double psi, const MarketSpec& market,
                   const UtilitySpec& utility) {
    const double u1 = utility.marginal(x);
    const double u2 = utility.marginal2(x);
    const double u3 = utility.marginal3(x);
    const double lam = market.lambda;
    const double q = lam * p + lam * u1 + psi;
    return (lam - 0.5 * u3 * q / (u2 * u2)) * market.covariance_rate() * q;
}

double strategy_from_y(double x, double y, double z, const MarketSpec& market,
                       const UtilitySpec& utility) {
    const double w = x + y;
    return -(market.lambda * utility.marginal(w) / utility.marginal2(w) + z);
}

double strategy_from_p(double x, double p, double psi, const MarketSpec& market,
                       const UtilitySpec& utility) {
    const double u2 = utility.marginal2(x);
    return -(market.lambda * p + market.lambda * utility.marginal(x) + psi) / u2;
}

std::vector<double> simulate_wealth(const PathEnsemble& ensemble, const std::vector<double>& pi,
                                    double x0, int start_step) {
    const int n_steps = ensemble.grid().n_steps();
    const int n_pts = n_steps + 1;
    const int n_paths = ensemble.n_paths();
    const double mu_dt = ensemble.market().mu * ensemble.grid().dt();
    std::vector<double> x(static_cast<std::size_t>(n_paths) * n_pts);
    parallel_for(static_cast<std::size_t>(n_paths), [&](std::size_t p) {
        const std::size_t base = p * n_pts;
        const std::size_t sbase = p * n_steps;
        for (int k = 0; k <= start_step; ++k) x[base + k] = x0;
        for (int k = start_step; k < n_steps; ++k)
            x[base + k + 1] = x[base + k] + pi[sbase + k] * (ensemble.dm(static_cast<int>(p), k) + mu_dt);
    });
    return x;
}

namespace {

// State columns for the step-k cross-sectional fits: wealth, plus the factor
// the endowment depends on.
StateColumns solver_states(const PathEnsemble& ensemble, const std::vector<double>& x, int k) {
    const std::ptrdiff_t stride = ensemble.grid().n_points();
    StateColumns cols;
    cols.push_back({x.data() + k, stride});
    if (ensemble.endowment().kind() == EndowmentSpec::Kind::tanh_w1)
        cols.push_back({ensemble.w1_data() + k, stride});
    if (ensemble.has_w2() && ensemble.endowment().kind() == EndowmentSpec::Kind::tanh_w2)
        cols.push_back({ensemble.w2_data() + k, stride});
    return cols;
}

void step_driver_increments(const PathEnsemble& ensemble, int k, std::vector<double>& dm,
                            std::vector<double>& dw2) {
    const int n_paths = ensemble.n_paths();
    dm.resize(n_paths);
    for (int p = 0; p < n_paths; ++p) dm[p] = ensemble.dm(p, k);
    if (ensemble.has_w2()) {
        dw2.resize(n_paths);
        for (int p = 0; p < n_paths; ++p) dw2[p] = ensemble.dw2(p, k);
    } else {
        dw2.clear();
    }
}

} // namespace

ConstructPResult construct_p_from_policy(const std::vector<double>& pi, double x0,
                                         const PathEnsemble& ensemble, const UtilitySpec& utility,
                                         const BasisSpec& basis, int start_step) {
    const int n_steps = ensemble.grid().n_steps();
    const int n_pts = n_steps + 1;
    const int n_paths = ensemble.n_paths();

    ConstructPResult out;
    out.x = simulate_wealth(ensemble, pi, x0, start_step);

    // terminal targets
    std::vector<double> targets(n_paths);
    for (int p = 0; p < n_paths; ++p)
        targets[p] =
            utility.marginal(out.x[static_cast<std::size_t>(p) * n_pts + n_steps] +
                             ensemble.endowment_value(p));

    // conditional martingale m_k = E(U'(X_T + H) | F_k); exact at the terminal step
    std::vector<double> m(static_cast<std::size_t>(n_paths) * n_pts, 0.0);
    for (int p = 0; p < n_paths; ++p) m[static_cast<std::size_t>(p) * n_pts + n_steps] = targets[p];

    parallel_for_tasks(static_cast<std::size_t>(n_steps - start_step), [&](std::size_t i) {
        const int k = start_step + static_cast<int>(i);
        std::vector<double> fitted;
        if (k == start_step) {
            // trivial sigma-field at the restart point: plain mean
            double mean = 0.0;
            for (double t : targets) mean += t;
            mean /= n_paths;
            fitted.assign(n_paths, mean);
        } else {
            fitted = conditional_expectation(targets, solver_states(ensemble, out.x, k), basis).fitted;
        }
        for (int p = 0; p < n_paths; ++p) m[static_cast<std::size_t>(p) * n_pts + k] = fitted[p];
    });

    out.p.assign(static_cast<std::size_t>(n_paths) * n_pts, 0.0);
    for (int p = 0; p < n_paths; ++p)
        for (int k = start_step; k <= n_steps; ++k) {
            const std::size_t i = static_cast<std::size_t>(p) * n_pts + k;
            out.p[i] = m[i] - utility.marginal(out.x[i]);
        }

    // psi from the increments of m, then the Ito correction for -U'(X)
    out.psi.assign(static_cast<std::size_t>(n_paths) * n_steps, 0.0);
    out.l_orth.assign(static_cast<std::size_t>(n_paths) * n_steps, 0.0);

    parallel_for_tasks(static_cast<std::size_t>(n_steps - start_step), [&](std::size_t i) {
        const int k = start_step + static_cast<int>(i);
        std::vector<double> incr(n_paths), dm, dw2;
        for (int p = 0; p < n_paths; ++p) {
            const std::size_t b = static_cast<std::size_t>(p) * n_pts + k;
            incr[p] = m[b + 1] - m[b];
        }
        step_driver_increments(ensemble, k, dm, dw2);
        const auto fit = fit_step_integrands(incr, dm, dw2, solver_states(ensemble, out.x, k), basis);
        for (int p = 0; p < n_paths; ++p) {
            const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
            const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
            out.psi[is] = fit.psi[p] - utility.marginal2(out.x[ip]) * pi[is];
            if (!fit.psi_orth.empty()) out.l_orth[is] = fit.psi_orth[p];
        }
    });
    return out;
}

FbsdeSolutionP solve_system_p_picard(const PathEnsemble& ensemble, const UtilitySpec& utility,
                                     double x0, const PicardConfig& config, int start_step) {
    config.validate();
    const int n_steps = ensemble.grid().n_steps();
    const int n_pts = n_steps + 1;
    const int n_paths = ensemble.n_paths();
    const MarketSpec& market = ensemble.market();

    FbsdeSolutionP sol;
    sol.n_paths = n_paths;
    sol.n_steps = n_steps;
    sol.start_step = start_step;
    sol.initial_wealth = x0;
    sol.ensemble_seed = ensemble.seed();
    sol.dt = ensemble.grid().dt();

    const double pi0 = -market.lambda * utility.marginal(x0) / utility.marginal2(x0);
    std::vector<double> pi(static_cast<std::size_t>(n_paths) * n_steps, pi0);

    ConstructPResult parts;
    std::vector<double> step_sq(n_steps, 0.0);

    for (int it = 1; it <= config.max_iterations; ++it) {
        parts = construct_p_from_policy(pi, x0, ensemble, utility, config.basis, start_step);

        // damped strategy update and its sup-over-steps RMS change
        std::fill(step_sq.begin(), step_sq.end(), 0.0);
        std::vector<double> pi_next(pi.size());
        for (int p = 0; p < n_paths; ++p) {
            for (int k = start_step; k < n_steps; ++k) {
                const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
                const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
                const double cand = strategy_from_p(parts.x[ip], parts.p[ip], parts.psi[is],
                                                    market, utility);
                pi_next[is] = (1.0 - config.damping) * pi[is] + config.damping * cand;
                const double d = pi_next[is] - pi[is];
                step_sq[k] += d * d;
            }
        }
        double change = 0.0;
        for (int k = start_step; k < n_steps; ++k)
            change = std::max(change, std::sqrt(step_sq[k] / n_paths));

        sol.history.iterations.push_back({it, change});
        if (change <= config.tolerance) {
            sol.history.converged = true;
            break;  // keep pi: parts are consistent with it
        }
        pi = std::move(pi_next);
    }

    if (!sol.history.converged) {
        // cap hit: report the last iterate
        parts = construct_p_from_policy(pi, x0, ensemble, utility, config.basis, start_step);
    }

    sol.x = std::move(parts.x);
    sol.p = std::move(parts.p);
    sol.psi = std::move(parts.psi);
    sol.l_orth = std::move(parts.l_orth);
    sol.pi = std::move(pi);

    double sq = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        const std::size_t i = static_cast<std::size_t>(p) * n_pts + n_steps;
        const double expect =
            utility.marginal(sol.x[i] + ensemble.endowment_value(p)) - utility.marginal(sol.x[i]);
        const double d = sol.p[i] - expect;
        sq += d * d;
    }
    sol.terminal_identity_rms = std::sqrt(sq / n_paths);
    return sol;
}

FbsdeSolutionY y_solution_from_p(const FbsdeSolutionP& sol_p, const PathEnsemble& ensemble,
                                 const UtilitySpec& utility) {
    const int n_steps = sol_p.n_steps;
    const int n_pts = n_steps + 1;
    const int n_paths = sol_p.n_paths;
    const MarketSpec& market = ensemble.market();

    FbsdeSolutionY sol;
    static_cast<SolutionBase&>(sol) = static_cast<const SolutionBase&>(sol_p);
    sol.x = sol_p.x;
    sol.pi = sol_p.pi;
    sol.y.assign(sol_p.p.size(), 0.0);
    sol.z.assign(sol_p.psi.size(), 0.0);
    sol.n_orth.assign(sol_p.l_orth.size(), 0.0);

    long clamped = 0;
    for (int p = 0; p < n_paths; ++p) {
        for (int k = sol_p.start_step; k <= n_steps; ++k) {
            const std::size_t i = static_cast<std::size_t>(p) * n_pts + k;
            const double u1x = utility.marginal(sol.x[i]);
            double marg = sol_p.p[i] + u1x;  // = U'(X + Y) when positive
            if (!(marg > 0.0)) {
                marg = 1e-12 * u1x;
                ++clamped;
            }
            const double y = -utility.conj_marginal(marg) - sol.x[i];
            sol.y[i] = y;
            if (k < n_steps) {
                const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
                const double u2x = utility.marginal2(sol.x[i]);
                sol.z[is] = (sol_p.psi[is] + market.lambda * marg) / u2x -
                            market.lambda * marg / utility.marginal2(sol.x[i] + y);
                sol.n_orth[is] = -utility.conj_marginal2(marg) * sol_p.l_orth[is];
            }
        }
    }
    sol.clamped_marginals = clamped;

    double sq = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        const std::size_t i = static_cast<std::size_t>(p) * n_pts + n_steps;
        const double d = sol.y[i] - ensemble.endowment_value(p);
        sq += d * d;
    }
    sol.terminal_mismatch_rms = std::sqrt(sq / n_paths);
    return sol;
}

namespace {

FbsdeSolutionY solve_system_y_direct(const PathEnsemble& ensemble, const UtilitySpec& utility,
                                     double x0, const PicardConfig& config, int start_step) {
    const int n_steps = ensemble.grid().n_steps();
    const int n_pts = n_steps + 1;
    const int n_paths = ensemble.n_paths();
    const MarketSpec& market = ensemble.market();
    const double dt = ensemble.grid().dt();
    const double dqv = ensemble.dqv();

    FbsdeSolutionY sol;
    sol.n_paths = n_paths;
    sol.n_steps = n_steps;
    sol.start_step = start_step;
    sol.initial_wealth = x0;
    sol.ensemble_seed = ensemble.seed();
    sol.dt = dt;

    const double pi0 = -market.lambda * utility.marginal(x0) / utility.marginal2(x0);
    std::vector<double> pi(static_cast<std::size_t>(n_paths) * n_steps, pi0);
    std::vector<double> x, y(static_cast<std::size_t>(n_paths) * n_pts, 0.0);
    std::vector<double> z(static_cast<std::size_t>(n_paths) * n_steps, 0.0);
    std::vector<double> n_orth(static_cast<std::size_t>(n_paths) * n_steps, 0.0);
    std::vector<double> step_sq(n_steps, 0.0);

    for (int it = 1; it <= config.max_iterations; ++it) {
        x = simulate_wealth(ensemble, pi, x0, start_step);

        for (int p = 0; p < n_paths; ++p)
            y[static_cast<std::size_t>(p) * n_pts + n_steps] = ensemble.endowment_value(p);

        std::vector<double> ybar(n_paths), zt(n_paths), nt(n_paths), dm, dw2;
        for (int k = n_steps - 1; k >= start_step; --k) {
            auto states = solver_states(ensemble, x, k);
            step_driver_increments(ensemble, k, dm, dw2);
            for (int p = 0; p < n_paths; ++p) {
                const double ynext = y[static_cast<std::size_t>(p) * n_pts + k + 1];
                zt[p] = ynext * dm[p] / dqv;
                if (!dw2.empty()) nt[p] = ynext * dw2[p] / dt;
            }
            std::vector<double> ynext_col(n_paths);
            for (int p = 0; p < n_paths; ++p)
                ynext_col[p] = y[static_cast<std::size_t>(p) * n_pts + k + 1];

            std::vector<double> yb, zf, nf;
            if (k == start_step) {
                auto mean_of = [&](const std::vector<double>& v) {
                    double m = 0.0;
                    for (double a : v) m += a;
                    return m / n_paths;
                };
                yb.assign(n_paths, mean_of(ynext_col));
                zf.assign(n_paths, mean_of(zt));
                if (!dw2.empty()) nf.assign(n_paths, mean_of(nt));
            } else {
                yb = conditional_expectation(ynext_col, states, config.basis).fitted;
                zf = conditional_expectation(zt, states, config.basis).fitted;
                if (!dw2.empty()) nf = conditional_expectation(nt, states, config.basis).fitted;
            }

            for (int p = 0; p < n_paths; ++p) {
                const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
                const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
                z[is] = zf[p];
                n_orth[is] = dw2.empty() ? 0.0 : nf[p];
                const double nu = n_orth[is] * n_orth[is];
                y[ip] = yb[p] - generator_y(x[ip], yb[p], z[is], nu, market, utility) * dt;
            }
        }

        std::fill(step_sq.begin(), step_sq.end(), 0.0);
        std::vector<double> pi_next(pi.size());
        for (int p = 0; p < n_paths; ++p) {
            for (int k = start_step; k < n_steps; ++k) {
                const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
                const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
                const double cand = strategy_from_y(x[ip], y[ip], z[is], market, utility);
                pi_next[is] = (1.0 - config.damping) * pi[is] + config.damping * cand;
                const double d = pi_next[is] - pi[is];
                step_sq[k] += d * d;
            }
        }
        double change = 0.0;
        for (int k = start_step; k < n_steps; ++k)
            change = std::max(change, std::sqrt(step_sq[k] / n_paths));
        sol.history.iterations.push_back({it, change});
        if (change <= config.tolerance) {
            sol.history.converged = true;
            break;
        }
        pi = std::move(pi_next);
    }

    sol.x = std::move(x);
    sol.y = std::move(y);
    sol.z = std::move(z);
    sol.n_orth = std::move(n_orth);
    sol.pi = std::move(pi);

    double sq = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        const std::size_t i = static_cast<std::size_t>(p) * n_pts + n_steps;
        const double d = sol.y[i] - ensemble.endowment_value(p);
        sq += d * d;
    }
    sol.terminal_mismatch_rms = std::sqrt(sq / n_paths);
    return sol;
}

} // namespace

FbsdeSolutionY solve_system_y(const PathEnsemble& ensemble, const UtilitySpec& utility, double x0,
                              const PicardConfig& config, YSolveMode mode, int start_step) {
    config.validate();
    if (mode == YSolveMode::direct)
        return solve_system_y_direct(ensemble, utility, x0, config, start_step);
    const FbsdeSolutionP sol_p = solve_system_p_picard(ensemble, utility, x0, config, start_step);
    return y_solution_from_p(sol_p, ensemble, utility);
}

namespace {

template <typename StepResidual>
ResidualStats residual_stats(const SolutionBase& sol, const std::vector<double>& backward,
                             const std::vector<double>& terminal_expect,
                             const PathEnsemble& ensemble, StepResidual step_residual) {
    const int n_steps = sol.n_steps;
    const int n_pts = n_steps + 1;
    const int n_paths = sol.n_paths;

    ResidualStats st;
    st.per_step_rms.assign(n_steps, 0.0);
    std::vector<double> recon(n_paths);
    for (int p = 0; p < n_paths; ++p)
        recon[p] = backward[static_cast<std::size_t>(p) * n_pts + sol.start_step];

    double total_sq = 0.0;
    long total_n = 0;
    for (int k = sol.start_step; k < n_steps; ++k) {
        double sq = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
            const std::size_t is = static_cast<std::size_t>(p) * n_steps + k;
            const double model = step_residual(p, k, ip, is);
            const double r = (backward[ip + 1] - backward[ip]) - model;
            recon[p] += model;
            sq += r * r;
        }
        st.per_step_rms[k] = std::sqrt(sq / n_paths);
        total_sq += sq;
        total_n += n_paths;
    }
    st.aggregate_step_rms = total_n > 0 ? std::sqrt(total_sq / total_n) : 0.0;

    double sq_recon = 0.0, sq_term = 0.0, sq_scale = 0.0;
    for (int p = 0; p < n_paths; ++p) {
        const std::size_t it = static_cast<std::size_t>(p) * n_pts + n_steps;
        const double dr = recon[p] - terminal_expect[p];
        const double dtm = backward[it] - terminal_expect[p];
        sq_recon += dr * dr;
        sq_term += dtm * dtm;
        for (int k = sol.start_step; k <= n_steps; ++k) {
            const double b = backward[static_cast<std::size_t>(p) * n_pts + k];
            sq_scale += b * b;
        }
    }
    st.terminal_reconstruction_rms = std::sqrt(sq_recon / n_paths);
    st.terminal_mismatch_rms = std::sqrt(sq_term / n_paths);
    const long n_scale = static_cast<long>(n_paths) * (n_steps - sol.start_step + 1);
    st.scale = std::sqrt(sq_scale / n_scale);
    (void)ensemble;
    return st;
}

} // namespace

ResidualStats residual_check_fbsde(const FbsdeSolutionP& sol, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility) {
    const MarketSpec& market = ensemble.market();
    const double dt = ensemble.grid().dt();
    std::vector<double> terminal_expect(sol.n_paths);
    for (int p = 0; p < sol.n_paths; ++p) {
        const std::size_t it = static_cast<std::size_t>(p) * (sol.n_steps + 1) + sol.n_steps;
        terminal_expect[p] = utility.marginal(sol.x[it] + ensemble.endowment_value(p)) -
                             utility.marginal(sol.x[it]);
    }
    return residual_stats(sol, sol.p, terminal_expect, ensemble,
                          [&](int p, int k, std::size_t ip, std::size_t is) {
                              return generator_p(sol.x[ip], sol.p[ip], sol.psi[is], market, utility) * dt +
                                     sol.psi[is] * ensemble.dm(p, k) +
                                     sol.l_orth[is] * ensemble.dw2(p, k);
                          });
}

ResidualStats residual_check_fbsde(const FbsdeSolutionY& sol, const PathEnsemble& ensemble,
                                   const UtilitySpec& utility) {
    const MarketSpec& market = ensemble.market();
    const double dt = ensemble.grid().dt();
    std::vector<double> terminal_expect(sol.n_paths);
    for (int p = 0; p < sol.n_paths; ++p) terminal_expect[p] = ensemble.endowment_value(p);
    return residual_stats(sol, sol.y, terminal_expect, ensemble,
                          [&](int p, int k, std::size_t ip, std::size_t is) {
                              const double nu = sol.n_orth[is] * sol.n_orth[is];
                              return generator_y(sol.x[ip], sol.y[ip], sol.z[is], nu, market, utility) * dt +
                                     sol.z[is] * ensemble.dm(p, k) +
                                     sol.n_orth[is] * ensemble.dw2(p, k);
                          });
}

RestartStats decoupling_restart_test(const DecouplingField& field, int start_step, double x,
                                     const PathEnsemble& ensemble, const UtilitySpec& utility,
                                     const PicardConfig& config) {
    RestartStats st;
    const int n_pts = ensemble.grid().n_points();

    std::vector<double> backward;
    std::vector<double> wealth;
    if (field.kind == DecouplingField::Kind::y_field) {
        FbsdeSolutionY sol = solve_system_y(ensemble, utility, x, config, YSolveMode::via_p, start_step);
        st.converged = sol.history.converged;
        backward = std::move(sol.y);
        wealth = std::move(sol.x);
    } else {
        FbsdeSolutionP sol = solve_system_p_picard(ensemble, utility, x, config, start_step);
        st.converged = sol.history.converged;
        backward = std::move(sol.p);
        wealth = std::move(sol.x);
    }

    double sq_d = 0.0, sq_ref = 0.0;
    long n = 0;
    for (int s = 0; s < field.n_slices(); ++s) {
        const int k = field.slice_steps[s];
        if (k < start_step) continue;
        for (int p = 0; p < ensemble.n_paths(); ++p) {
            const std::size_t i = static_cast<std::size_t>(p) * n_pts + k;
            const double u = field.evaluate(s, wealth[i]);
            const double d = backward[i] - u;
            sq_d += d * d;
            sq_ref += backward[i] * backward[i];
            ++n;
        }
    }
    if (n > 0) {
        st.rms_discrepancy = std::sqrt(sq_d / n);
        st.rms_reference = std::sqrt(sq_ref / n);
        st.relative = st.rms_reference > 0.0 ? st.rms_discrepancy / st.rms_reference
                                             : st.rms_discrepancy;
    }
    return st;
}

PolicyField fit_policy_field(const FbsdeSolutionP& sol, const PathEnsemble& ensemble,
                             const BasisSpec& basis) {
    if (sol.ensemble_seed != ensemble.seed() || sol.n_paths != ensemble.n_paths())
        throw ConfigError("fit_policy_field: solution does not match the ensemble");
    const int n_steps = sol.n_steps;
    const int n_pts = n_steps + 1;
    const int n_paths = sol.n_paths;
    std::vector<ConditionalEstimator> per_step(n_steps);

    parallel_for_tasks(static_cast<std::size_t>(n_steps - sol.start_step), [&](std::size_t i) {
        const int k = sol.start_step + static_cast<int>(i);
        std::vector<double> target(n_paths);
        for (int p = 0; p < n_paths; ++p)
            target[p] = sol.pi[static_cast<std::size_t>(p) * n_steps + k];
        StateColumns states{{sol.x.data() + k, n_pts}};
        if (k == sol.start_step) {
            double mean = 0.0;
            for (double t : target) mean += t;
            mean /= n_paths;
            ConditionalEstimator est;
            est.coefficients = {mean};
            per_step[k] = std::move(est);
        } else {
            per_step[k] = conditional_expectation(target, states, basis).estimator;
        }
    });
    // fill any leading window with the first fitted step
    for (int k = 0; k < sol.start_step; ++k) per_step[k] = per_step[sol.start_step];
    return PolicyField::per_step_fit(std::move(per_step));
}

} // namespace fbdual
