#include "fbdual/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace fbdual {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long i = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long i = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned value for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean value for " + key + ": '" + v + "' (use on/off)");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig c;

    std::map<std::string, std::function<void(const std::string&, const std::string&)>> setters;
    auto dbl = [&](const std::string& k, double* target) {
        setters[k] = [target](const std::string& key, const std::string& v) {
            *target = parse_double(key, v);
        };
    };
    auto integer = [&](const std::string& k, int* target) {
        setters[k] = [target](const std::string& key, const std::string& v) {
            *target = static_cast<int>(parse_int(key, v));
        };
    };
    auto boolean = [&](const std::string& k, bool* target) {
        setters[k] = [target](const std::string& key, const std::string& v) {
            *target = parse_bool(key, v);
        };
    };
    auto str = [&](const std::string& k, std::string* target) {
        setters[k] = [target](const std::string&, const std::string& v) { *target = v; };
    };

    dbl("market.mu", &c.market_mu);
    dbl("market.sigma", &c.market_sigma);
    boolean("market.orthogonal_factor", &c.market_orthogonal_factor);
    str("utility.family", &c.utility_family);
    dbl("utility.gamma", &c.utility_gamma);
    str("endowment.kind", &c.endowment_kind);
    dbl("endowment.value", &c.endowment_value);
    dbl("endowment.scale", &c.endowment_scale);
    dbl("grid.horizon", &c.grid_horizon);
    integer("grid.steps", &c.grid_steps);
    integer("paths.count", &c.paths_count);
    setters["paths.seed"] = [&c](const std::string& key, const std::string& v) {
        c.paths_seed = parse_u64(key, v);
    };
    dbl("initial.wealth", &c.initial_wealth);
    integer("regression.degree", &c.regression_degree);
    dbl("regression.ridge", &c.regression_ridge);
    integer("picard.max_iterations", &c.picard_max_iterations);
    dbl("picard.damping", &c.picard_damping);
    dbl("picard.tolerance", &c.picard_tolerance);
    integer("surface.x_points", &c.surface_x_points);
    dbl("surface.x_span", &c.surface_x_span);
    integer("surface.t_slices", &c.surface_t_slices);
    boolean("surface.smooth", &c.surface_smooth);
    str("surface.policy", &c.surface_policy);
    dbl("surface.policy_value", &c.surface_policy_value);
    dbl("surface.vpp_floor", &c.surface_vpp_floor);
    dbl("tolerance.y2", &c.tolerances.y2_rel);
    dbl("tolerance.y3", &c.tolerances.y3_rel);
    dbl("tolerance.y4", &c.tolerances.y4_rel);
    dbl("tolerance.strategy_spread", &c.tolerances.strategy_spread_rel);
    dbl("tolerance.roundtrip", &c.tolerances.roundtrip_rel);
    dbl("tolerance.duality_cv", &c.tolerances.duality_cv);
    dbl("tolerance.martingale_z", &c.tolerances.martingale_z);
    dbl("tolerance.op_decomposition", &c.tolerances.op_decomposition_rel);
    dbl("tolerance.complete_orth", &c.tolerances.complete_orth_rel);
    integer("ladder.levels", &c.ladder_levels);
    str("output.dir", &c.output_dir);

    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + " is not key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw ConfigError("config: unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
        if (!seen.insert(key).second)
            throw ConfigError("config: duplicate key '" + key + "'");
        it->second(key, value);
    }

    // cross-validation
    if (c.utility_family != "exponential")
        throw ConfigError("config: utility.family must be 'exponential'");
    if (!(c.utility_gamma > 0.0)) throw ConfigError("config: utility.gamma must be positive");
    if (!(c.market_sigma > 0.0)) throw ConfigError("config: market.sigma must be positive");
    if (c.endowment_kind != "constant" && c.endowment_kind != "tanh_w1" &&
        c.endowment_kind != "tanh_w2")
        throw ConfigError("config: endowment.kind must be constant | tanh_w1 | tanh_w2");
    if (c.endowment_kind == "tanh_w2" && !c.market_orthogonal_factor)
        throw ConfigError("config: endowment.kind = tanh_w2 requires market.orthogonal_factor = on");
    if (c.grid_steps < 1) throw ConfigError("config: grid.steps must be >= 1");
    if (c.paths_count < 1) throw ConfigError("config: paths.count must be >= 1");
    if (c.surface_policy != "solved" && c.surface_policy != "myopic" &&
        c.surface_policy != "constant")
        throw ConfigError("config: surface.policy must be solved | myopic | constant");
    if (c.ladder_levels < 1) throw ConfigError("config: ladder.levels must be >= 1");
    c.picard().validate();
    return c;
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    os << "endowment.kind = " << endowment_kind << "\n";
    os << "endowment.scale = " << fmt_double(endowment_scale) << "\n";
    os << "endowment.value = " << fmt_double(endowment_value) << "\n";
    os << "grid.horizon = " << fmt_double(grid_horizon) << "\n";
    os << "grid.steps = " << grid_steps << "\n";
    os << "initial.wealth = " << fmt_double(initial_wealth) << "\n";
    os << "ladder.levels = " << ladder_levels << "\n";
    os << "market.mu = " << fmt_double(market_mu) << "\n";
    os << "market.orthogonal_factor = " << (market_orthogonal_factor ? "on" : "off") << "\n";
    os << "market.sigma = " << fmt_double(market_sigma) << "\n";
    os << "output.dir = " << output_dir << "\n";
    os << "paths.count = " << paths_count << "\n";
    os << "paths.seed = " << paths_seed << "\n";
    os << "picard.damping = " << fmt_double(picard_damping) << "\n";
    os << "picard.max_iterations = " << picard_max_iterations << "\n";
    os << "picard.tolerance = " << fmt_double(picard_tolerance) << "\n";
    os << "regression.degree = " << regression_degree << "\n";
    os << "regression.ridge = " << fmt_double(regression_ridge) << "\n";
    os << "surface.policy = " << surface_policy << "\n";
    os << "surface.policy_value = " << fmt_double(surface_policy_value) << "\n";
    os << "surface.smooth = " << (surface_smooth ? "on" : "off") << "\n";
    os << "surface.t_slices = " << surface_t_slices << "\n";
    os << "surface.vpp_floor = " << fmt_double(surface_vpp_floor) << "\n";
    os << "surface.x_points = " << surface_x_points << "\n";
    os << "surface.x_span = " << fmt_double(surface_x_span) << "\n";
    os << "tolerance.complete_orth = " << fmt_double(tolerances.complete_orth_rel) << "\n";
    os << "tolerance.duality_cv = " << fmt_double(tolerances.duality_cv) << "\n";
    os << "tolerance.martingale_z = " << fmt_double(tolerances.martingale_z) << "\n";
    os << "tolerance.op_decomposition = " << fmt_double(tolerances.op_decomposition_rel) << "\n";
    os << "tolerance.roundtrip = " << fmt_double(tolerances.roundtrip_rel) << "\n";
    os << "tolerance.strategy_spread = " << fmt_double(tolerances.strategy_spread_rel) << "\n";
    os << "tolerance.y2 = " << fmt_double(tolerances.y2_rel) << "\n";
    os << "tolerance.y3 = " << fmt_double(tolerances.y3_rel) << "\n";
    os << "tolerance.y4 = " << fmt_double(tolerances.y4_rel) << "\n";
    os << "utility.family = " << utility_family << "\n";
    os << "utility.gamma = " << fmt_double(utility_gamma) << "\n";
    return os.str();
}

MarketSpec RunConfig::market() const {
    return MarketSpec::make(market_mu, market_sigma, market_orthogonal_factor);
}

UtilitySpec RunConfig::utility() const { return UtilitySpec::exponential(utility_gamma); }

EndowmentSpec RunConfig::endowment() const {
    if (endowment_kind == "constant") return EndowmentSpec::constant(endowment_value);
    if (endowment_kind == "tanh_w1") return EndowmentSpec::tanh_of_w1(endowment_scale);
    return EndowmentSpec::tanh_of_w2(endowment_scale);
}

TimeGrid RunConfig::time_grid() const { return TimeGrid(grid_horizon, grid_steps); }

BasisSpec RunConfig::basis() const {
    BasisSpec b;
    b.degree = regression_degree;
    b.ridge = regression_ridge;
    return b;
}

PicardConfig RunConfig::picard() const {
    PicardConfig p;
    p.max_iterations = picard_max_iterations;
    p.damping = picard_damping;
    p.tolerance = picard_tolerance;
    p.basis = basis();
    return p;
}

SurfaceConfig RunConfig::surface() const {
    SurfaceConfig s;
    s.x_points = surface_x_points;
    s.x_span_sigmas = surface_x_span;
    s.t_slices = surface_t_slices;
    s.smooth = surface_smooth;
    s.vpp_floor_rel = surface_vpp_floor;
    s.basis = basis();
    return s;
}

} // namespace fbdual
