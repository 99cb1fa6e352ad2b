#pragma once

#include <cstdint>
#include <string>

#include "fbdual/bridge.hpp"
#include "fbdual/fbsde.hpp"
#include "fbdual/market.hpp"
#include "fbdual/surface.hpp"
#include "fbdual/time_grid.hpp"
#include "fbdual/utility.hpp"

namespace fbdual {

// Flat `section.key = value` run configuration. Unknown or duplicate keys are
// rejected. `echo()` renders every effective key (defaults resolved) at full
// double precision, so a run can be reproduced bit-identically from its echo.
struct RunConfig {
    // market
    double market_mu = 0.1;
    double market_sigma = 0.2;
    bool market_orthogonal_factor = false;

    // utility
    std::string utility_family = "exponential";
    double utility_gamma = 1.0;

    // endowment
    std::string endowment_kind = "constant";
    double endowment_value = 0.0;
    double endowment_scale = 0.5;

    // grid / paths
    double grid_horizon = 1.0;
    int grid_steps = 100;
    int paths_count = 50000;
    std::uint64_t paths_seed = 20240901;
    double initial_wealth = 0.0;

    // regression
    int regression_degree = 3;
    double regression_ridge = 1e-8;

    // picard
    int picard_max_iterations = 30;
    double picard_damping = 0.5;
    double picard_tolerance = 1e-3;

    // surface
    int surface_x_points = 41;
    double surface_x_span = 4.0;
    int surface_t_slices = 21;
    bool surface_smooth = false;
    std::string surface_policy = "solved";  // solved | myopic | constant
    double surface_policy_value = 0.0;
    double surface_vpp_floor = 1e-6;

    // tolerances
    IdentityTolerances tolerances;

    // ladder
    int ladder_levels = 3;

    // output
    std::string output_dir = "out";

    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);
    std::string echo() const;

    // assembled objects
    MarketSpec market() const;
    UtilitySpec utility() const;
    EndowmentSpec endowment() const;
    TimeGrid time_grid() const;
    BasisSpec basis() const;
    PicardConfig picard() const;
    SurfaceConfig surface() const;
};

} // namespace fbdual
