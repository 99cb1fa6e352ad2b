#include "fbdual/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fbdual {

namespace {

struct CsvOut {
    std::FILE* f;
    explicit CsvOut(const std::string& path) : f(std::fopen(path.c_str(), "w")) {
        if (!f) throw ConfigError("io: cannot open '" + path + "' for writing");
    }
    ~CsvOut() {
        if (f) std::fclose(f);
    }
    CsvOut(const CsvOut&) = delete;
    CsvOut& operator=(const CsvOut&) = delete;
};

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
    out << content;
}

void write_ensemble_csv(const std::string& path, const PathEnsemble& ensemble) {
    CsvOut out(path);
    std::fprintf(out.f, "path,step,t,w1,w2,m,s,dm,dqv,h\n");
    const int n = ensemble.grid().n_steps();
    for (int p = 0; p < ensemble.n_paths(); ++p) {
        for (int k = 0; k <= n; ++k) {
            std::fprintf(out.f, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p, k,
                         ensemble.grid().t(k), ensemble.w1(p, k), ensemble.w2(p, k),
                         ensemble.m(p, k), ensemble.s(p, k), k < n ? ensemble.dm(p, k) : 0.0,
                         k < n ? ensemble.dqv() : 0.0, ensemble.endowment_value(p));
        }
    }
}

void write_solution_p_csv(const std::string& path, const FbsdeSolutionP& sol) {
    CsvOut out(path);
    std::fprintf(out.f, "path,step,t,x,p,psi,l_orth,pi\n");
    const int n_pts = sol.n_steps + 1;
    for (int p = 0; p < sol.n_paths; ++p) {
        for (int k = sol.start_step; k <= sol.n_steps; ++k) {
            const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
            const std::size_t is = static_cast<std::size_t>(p) * sol.n_steps + k;
            const bool interior = k < sol.n_steps;
            std::fprintf(out.f, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p, k, k * sol.dt,
                         sol.x[ip], sol.p[ip], interior ? sol.psi[is] : 0.0,
                         interior ? sol.l_orth[is] : 0.0, interior ? sol.pi[is] : 0.0);
        }
    }
}

void write_solution_y_csv(const std::string& path, const FbsdeSolutionY& sol) {
    CsvOut out(path);
    std::fprintf(out.f, "path,step,t,x,y,z,n_orth,pi\n");
    const int n_pts = sol.n_steps + 1;
    for (int p = 0; p < sol.n_paths; ++p) {
        for (int k = sol.start_step; k <= sol.n_steps; ++k) {
            const std::size_t ip = static_cast<std::size_t>(p) * n_pts + k;
            const std::size_t is = static_cast<std::size_t>(p) * sol.n_steps + k;
            const bool interior = k < sol.n_steps;
            std::fprintf(out.f, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p, k, k * sol.dt,
                         sol.x[ip], sol.y[ip], interior ? sol.z[is] : 0.0,
                         interior ? sol.n_orth[is] : 0.0, interior ? sol.pi[is] : 0.0);
        }
    }
}

void write_surface_csv(const std::string& path, const ValueSurface& surface,
                       const ResidualTable* bspde, const ResidualTable* bspde_deriv) {
    CsvOut out(path);
    std::fprintf(out.f,
                 "t,x,v,vx,vxx,vxxx,phi,phi_x,ell,a,drift_v,se_v,vm,bspde_residual,"
                 "bspde_deriv_residual\n");
    for (int s = 0; s < surface.n_slices(); ++s) {
        for (int j = 0; j < surface.n_x(); ++j) {
            std::fprintf(
                out.f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                       "%.17g,%.17g,%.17g\n",
                surface.t(s), surface.xs[j], surface.v.at(s, j),
                surface.has_derivatives ? surface.vx.at(s, j) : 0.0,
                surface.has_derivatives ? surface.vxx.at(s, j) : 0.0,
                surface.has_derivatives ? surface.vxxx.at(s, j) : 0.0, surface.phi.at(s, j),
                surface.has_derivatives ? surface.phi_x.at(s, j) : 0.0, surface.ell.at(s, j),
                surface.has_derivatives ? surface.a.at(s, j) : 0.0, surface.drift_v.at(s, j),
                surface.se_v.at(s, j), surface.has_marginal ? surface.vm.at(s, j) : 0.0,
                bspde ? bspde->cells.at(s, j) : 0.0,
                bspde_deriv ? bspde_deriv->cells.at(s, j) : 0.0);
        }
    }
}

std::string history_json(const PicardHistory& history) {
    nlohmann::json j;
    j["converged"] = history.converged;
    j["iterations"] = nlohmann::json::array();
    for (const auto& it : history.iterations) {
        nlohmann::json ji;
        ji["iteration"] = it.iteration;
        ji["strategy_change"] = it.strategy_change;
        j["iterations"].push_back(ji);
    }
    return j.dump(2);
}

void write_ladder_csv(const std::string& path, const std::vector<LadderRow>& rows) {
    CsvOut out(path);
    std::fprintf(out.f, "level,Y0_error,pi_error,bspde_residual_rms,runtime_seconds\n");
    for (const auto& r : rows)
        std::fprintf(out.f, "%d,%.17g,%.17g,%.17g,%.17g\n", r.level, r.y0_error, r.pi_error,
                     r.bspde_residual_rms, r.runtime_seconds);
}

} // namespace fbdual
