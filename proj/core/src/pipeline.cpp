#include "fbdual/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>

#include "fbdual/bridge.hpp"

namespace fbdual {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

PolicyField resolve_policy(const RunConfig& cfg, const FbsdeSolutionP* solved,
                           const PathEnsemble& ensemble) {
    if (cfg.surface_policy == "myopic")
        return PolicyField::myopic(ensemble.market(), cfg.utility());
    if (cfg.surface_policy == "constant") return PolicyField::constant(cfg.surface_policy_value);
    if (!solved)
        throw ConfigError("surface.policy = solved requires a solver run in this command");
    return fit_policy_field(*solved, ensemble, cfg.basis());
}

struct SurfaceBundle {
    ValueSurface surface;
    ResidualTable bspde;
    ResidualTable bspde_deriv;
};

SurfaceBundle build_surface(const RunConfig& cfg, const PathEnsemble& ensemble,
                            const PolicyField& policy) {
    const MarketSpec market = ensemble.market();
    const UtilitySpec utility = cfg.utility();
    const TimeGrid grid = cfg.time_grid();
    const SurfaceConfig scfg = cfg.surface();
    const auto xs = default_xgrid(cfg.initial_wealth, market, utility, grid, scfg);
    SurfaceBundle b;
    b.surface = estimate_value_surface(market, utility, policy, grid, xs, ensemble, scfg, true);
    surface_derivatives(b.surface, scfg);
    b.bspde = bspde_residual(b.surface, market, scfg);
    b.bspde_deriv = bspde_derivative_residual(b.surface, market, scfg);
    return b;
}

} // namespace

Command parse_command(const std::string& name) {
    if (name == "simulate") return Command::simulate;
    if (name == "solve-p") return Command::solve_p;
    if (name == "solve-y") return Command::solve_y;
    if (name == "surface") return Command::surface;
    if (name == "verify") return Command::verify;
    if (name == "convergence") return Command::convergence;
    throw ConfigError("unknown command '" + name +
                      "' (use simulate | solve-p | solve-y | surface | verify | convergence)");
}

int run_command(const RunConfig& cfg, Command command, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/effective.cfg", cfg.echo());

    const MarketSpec market = cfg.market();
    const UtilitySpec utility = cfg.utility();
    const TimeGrid grid = cfg.time_grid();
    const PathEnsemble ensemble =
        simulate_paths(market, grid, cfg.endowment(), cfg.paths_count, cfg.paths_seed);

    switch (command) {
        case Command::simulate: {
            write_ensemble_csv(out_dir + "/ensemble.csv", ensemble);
            return exit_code::pass;
        }
        case Command::solve_p: {
            const FbsdeSolutionP sol =
                solve_system_p_picard(ensemble, utility, cfg.initial_wealth, cfg.picard());
            write_solution_p_csv(out_dir + "/solution_p.csv", sol);
            write_text_file(out_dir + "/history_p.json", history_json(sol.history));
            return sol.history.converged ? exit_code::pass : exit_code::non_convergence;
        }
        case Command::solve_y: {
            const FbsdeSolutionY sol =
                solve_system_y(ensemble, utility, cfg.initial_wealth, cfg.picard());
            write_solution_y_csv(out_dir + "/solution_y.csv", sol);
            write_text_file(out_dir + "/history_y.json", history_json(sol.history));
            return sol.history.converged ? exit_code::pass : exit_code::non_convergence;
        }
        case Command::surface: {
            bool converged = true;
            PolicyField policy = [&] {
                if (cfg.surface_policy == "solved") {
                    FbsdeSolutionP sol =
                        solve_system_p_picard(ensemble, utility, cfg.initial_wealth, cfg.picard());
                    converged = sol.history.converged;
                    return resolve_policy(cfg, &sol, ensemble);
                }
                return resolve_policy(cfg, nullptr, ensemble);
            }();
            const SurfaceBundle b = build_surface(cfg, ensemble, policy);
            write_surface_csv(out_dir + "/surface.csv", b.surface, &b.bspde, &b.bspde_deriv);
            return converged ? exit_code::pass : exit_code::non_convergence;
        }
        case Command::verify: {
            const FbsdeSolutionP sol_p =
                solve_system_p_picard(ensemble, utility, cfg.initial_wealth, cfg.picard());
            const FbsdeSolutionY sol_y = y_solution_from_p(sol_p, ensemble, utility);
            const PolicyField policy = resolve_policy(cfg, &sol_p, ensemble);
            const SurfaceBundle b = build_surface(cfg, ensemble, policy);
            const VerificationReport report =
                identity_report(sol_y, sol_p, b.surface, ensemble, utility, cfg.tolerances);

            write_solution_p_csv(out_dir + "/solution_p.csv", sol_p);
            write_solution_y_csv(out_dir + "/solution_y.csv", sol_y);
            write_text_file(out_dir + "/history_p.json", history_json(sol_p.history));
            write_surface_csv(out_dir + "/surface.csv", b.surface, &b.bspde, &b.bspde_deriv);
            write_text_file(out_dir + "/report.json", report.to_json());
            const std::string table = report.to_table();
            write_text_file(out_dir + "/report.txt", table);
            std::cout << table;

            if (!sol_p.history.converged) return exit_code::non_convergence;
            return report.overall_pass() ? exit_code::pass : exit_code::identity_failure;
        }
        case Command::convergence: {
            const auto rows = convergence_ladder(cfg, cfg.ladder_levels);
            write_ladder_csv(out_dir + "/ladder.csv", rows);
            // non-increasing within a 20% noise band across consecutive levels
            bool ok = true;
            for (std::size_t i = 1; i < rows.size(); ++i) {
                if (rows[i].y0_error > 1.2 * rows[i - 1].y0_error + 1e-14) ok = false;
                if (rows[i].bspde_residual_rms > 1.2 * rows[i - 1].bspde_residual_rms + 1e-14)
                    ok = false;
            }
            return ok ? exit_code::pass : exit_code::identity_failure;
        }
    }
    return exit_code::config_error;
}

std::vector<LadderRow> convergence_ladder(const RunConfig& cfg, int levels) {
    if (cfg.endowment_kind != "constant")
        throw ConfigError("convergence: the refinement ladder needs endowment.kind = constant");
    const double theta = cfg.market_mu / cfg.market_sigma;
    const double y0_ref = cfg.endowment_value +
                          theta * theta * cfg.grid_horizon / (2.0 * cfg.utility_gamma);
    const double pi_ref =
        cfg.market_mu / (cfg.utility_gamma * cfg.market_sigma * cfg.market_sigma);

    std::vector<LadderRow> rows;
    for (int level = 0; level < levels; ++level) {
        RunConfig lvl = cfg;
        lvl.grid_steps = cfg.grid_steps << level;
        lvl.paths_count = cfg.paths_count << (2 * level);
        lvl.surface_x_points = (cfg.surface_x_points - 1) * (1 << level) + 1;

        const double t0 = now_seconds();
        const MarketSpec market = lvl.market();
        const UtilitySpec utility = lvl.utility();
        const TimeGrid grid = lvl.time_grid();
        const PathEnsemble ensemble =
            simulate_paths(market, grid, lvl.endowment(), lvl.paths_count, lvl.paths_seed);

        const FbsdeSolutionY sol =
            solve_system_y(ensemble, utility, lvl.initial_wealth, lvl.picard());
        const double y0 = sol.y[0];
        double pi_mean = 0.0;
        for (double v : sol.pi) pi_mean += v;
        pi_mean /= static_cast<double>(sol.pi.size());

        PolicyField policy = [&]() -> PolicyField {
            if (lvl.surface_policy == "constant")
                return PolicyField::constant(lvl.surface_policy_value);
            if (lvl.surface_policy == "solved") {
                const FbsdeSolutionP sol_p =
                    solve_system_p_picard(ensemble, utility, lvl.initial_wealth, lvl.picard());
                return fit_policy_field(sol_p, ensemble, lvl.basis());
            }
            return PolicyField::myopic(market, utility);
        }();
        const SurfaceBundle b = build_surface(lvl, ensemble, policy);

        LadderRow row;
        row.level = level;
        row.dt = grid.dt();
        row.dx = b.surface.xs[1] - b.surface.xs[0];
        row.n_paths = lvl.paths_count;
        row.y0_error = std::abs(y0 - y0_ref);
        row.pi_error = std::abs(pi_mean - pi_ref);
        row.bspde_residual_rms = b.bspde.rms;
        row.bspde_deriv_residual_rms = b.bspde_deriv.rms;
        row.runtime_seconds = now_seconds() - t0;
        rows.push_back(row);
    }
    return rows;
}

} // namespace fbdual
