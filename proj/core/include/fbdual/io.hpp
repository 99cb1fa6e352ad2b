#pragma once

#include <string>
#include <vector>

#include "fbdual/fbsde.hpp"
#include "fbdual/market.hpp"
#include "fbdual/surface.hpp"

namespace fbdual {

// CSV artifacts, numeric columns at full double precision.

void write_ensemble_csv(const std::string& path, const PathEnsemble& ensemble);
void write_solution_p_csv(const std::string& path, const FbsdeSolutionP& sol);
void write_solution_y_csv(const std::string& path, const FbsdeSolutionY& sol);
void write_surface_csv(const std::string& path, const ValueSurface& surface,
                       const ResidualTable* bspde, const ResidualTable* bspde_deriv);
std::string history_json(const PicardHistory& history);
void write_text_file(const std::string& path, const std::string& content);

struct LadderRow {
    int level = 0;
    double dt = 0.0;
    double dx = 0.0;
    int n_paths = 0;
    double y0_error = 0.0;
    double pi_error = 0.0;
    double bspde_residual_rms = 0.0;
    double bspde_deriv_residual_rms = 0.0;
    double runtime_seconds = 0.0;
};

// Columns: level, Y0_error, pi_error, bspde_residual_rms, runtime_seconds.
void write_ladder_csv(const std::string& path, const std::vector<LadderRow>& rows);

} // namespace fbdual
