#pragma once

#include <string>
#include <vector>

#include "fbdual/config.hpp"
#include "fbdual/io.hpp"

namespace fbdual {

enum class Command { simulate, solve_p, solve_y, surface, verify, convergence };

Command parse_command(const std::string& name);  // throws ConfigError

// Exit-code contract: 0 pass, 1 identity failure, 2 configuration error,
// 3 solver non-convergence. Artifacts of a failed run are still written.
namespace exit_code {
inline constexpr int pass = 0;
inline constexpr int identity_failure = 1;
inline constexpr int config_error = 2;
inline constexpr int non_convergence = 3;
} // namespace exit_code

// Runs one command, writing artifacts (and the resolved-configuration echo
// `effective.cfg`) into out_dir. Returns the exit code.
int run_command(const RunConfig& config, Command command, const std::string& out_dir);

// Refinement ladder (dt, dx, n_paths) -> (dt/2, dx/2, 4 n_paths) per level,
// with closed-form strategy and Y0 references for the constant-endowment
// exponential market. Level 0 is the configuration as given.
std::vector<LadderRow> convergence_ladder(const RunConfig& config, int levels);

} // namespace fbdual
