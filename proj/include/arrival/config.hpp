#pragma once

// Experiment configuration: presets, the key = value file format, validation
// and conversion into internal units.
//
// File grammar (one statement per line):
//
//   # comment            ; comment
//   [section]
//   key = value          value may carry a unit suffix, e.g. -4mm, 20um, 1e-6
//
// Sections and keys are listed in README.md. Unknown sections or keys are
// rejected. `preset = <name>` inside [run] must come first and seeds every
// field from that preset before the remaining keys are applied.

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "units.hpp"

namespace arrival {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : std::runtime_error(field.empty() ? what : field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct IntegratorSettings {
    double rtol = 1e-9;          // relative, on positions
    double atol = 1e-15;         // m
    double dt_min = 1e-12;       // s
    double h0 = 1e-6;            // s, first trial step
    double node_epsilon = 1e-24; // relative to running max of |Psi|^2
    std::size_t max_knots = 2000;
    bool full_trajectory = false;
};

struct AbrSettings {
    double kappa_over_kappa0 = 1.0;
    int n_grid = 8192;
    double dt = 0.0;             // s; 0 -> 2e-4 x classical fall time
    double t_max = 0.0;          // s; 0 -> 4 x classical fall time
    int grid_steps_per_half_step = 4;  // trajectory RK4 step = 2x this many grid steps
    double survival_cadence = 0.0;     // s; 0 -> every trajectory step
};

struct ExperimentConfig {
    std::string preset;
    std::string species = "sodium-23";
    double sigma_x = 1e-6, sigma_y = 1e-6;  // m
    double l_x = 5e-3, l_y = 1e-5;          // m
    double u_x = 20.0, u_y = 0.0;           // m/s
    double eta = -1.0;
    double y_left = -4e-3, y_right = -0.08; // m, signed, relative to slit-plane centre
    double x_split = 0.0;                   // m
    double t_max = 0.0;                     // s; 0 -> automatic
    std::size_t n_events = 10000;
    std::uint64_t seed = 1;
    bool collapse_enabled = true;
    unsigned workers = 1;
    IntegratorSettings integrator;
    AbrSettings abr;
};

// ---------------------------------------------------------------------------
// Quantities with unit suffixes

enum class Dimension { none, length, velocity, time, count, flag, text };

namespace detail {

inline std::string trim(std::string s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline double unit_factor(Dimension dim, const std::string& unit) {
    if (unit.empty()) return 1.0;
    switch (dim) {
        case Dimension::length:
            if (unit == "m") return 1.0;
            if (unit == "cm") return 1e-2;
            if (unit == "mm") return 1e-3;
            if (unit == "um" || unit == "\xC2\xB5m" || unit == "\xCE\xBCm") return 1e-6;
            if (unit == "nm") return 1e-9;
            break;
        case Dimension::time:
            if (unit == "s") return 1.0;
            if (unit == "ms") return 1e-3;
            if (unit == "us") return 1e-6;
            break;
        case Dimension::velocity:
            if (unit == "m/s") return 1.0;
            if (unit == "mm/s") return 1e-3;
            if (unit == "um/ms") return 1e-3;
            break;
        default: break;
    }
    throw std::invalid_argument("unit '" + unit + "' not valid here");
}

}  // namespace detail

/// Parses "<number>[unit]" into SI.
inline double parse_quantity(const std::string& text, Dimension dim) {
    const std::string s = detail::trim(text);
    if (s.empty()) throw std::invalid_argument("empty value");
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("'" + s + "' is not a number");
    }
    if (!std::isfinite(v)) throw std::invalid_argument("'" + s + "' is not finite");
    return v * detail::unit_factor(dim, detail::trim(s.substr(used)));
}

inline bool parse_flag(const std::string& text) {
    const std::string s = detail::trim(text);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("'" + s + "' is not a boolean");
}

inline std::uint64_t parse_count(const std::string& text) {
    const std::string s = detail::trim(text);
    if (s.empty() || s[0] == '-') throw std::invalid_argument("'" + s + "' is not a non-negative integer");
    // accept 1e5 style as well as plain integers
    std::size_t used = 0;
    unsigned long long iv = 0;
    try {
        iv = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == s.size()) return iv;
    double d = parse_quantity(s, Dimension::none);
    if (d < 0 || d != std::floor(d) || d > 1.8e19)
        throw std::invalid_argument("'" + s + "' is not a non-negative integer");
    return static_cast<std::uint64_t>(d);
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<std::string> preset_names() {
    return {"fig2", "fig3", "fig4", "fig5", "fig7", "fig7-near", "fig7-middle", "fig7-far"};
}

inline ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;  // defaults are the common slit geometry
    c.preset = name;
    if (name == "fig2" || name == "fig3") {
        c.species = "sodium-23";
        c.y_left = -4e-3;
        c.y_right = -0.08;
    } else if (name == "fig4") {
        c.species = "cesium-133";
        c.y_left = -1e-3;
        c.y_right = -0.08;
    } else if (name == "fig5") {
        c.species = "helium-4";
        c.y_left = -40e-6;
        c.y_right = -40e-6;
        c.n_events = 2000;
    } else if (name == "fig7" || name == "fig7-middle") {
        // unentangled, so each one-particle marginal carries interference
        c.species = "sodium-23";
        c.eta = 0.0;
        c.y_left = -4e-3;
        c.y_right = -0.08;
    } else if (name == "fig7-near") {
        c.species = "sodium-23";
        c.eta = 0.0;
        c.y_left = -15e-6;
        c.y_right = -0.08;
    } else if (name == "fig7-far") {
        c.species = "sodium-23";
        c.eta = 0.0;
        c.y_left = -0.08;
        c.y_right = -0.08;
    } else {
        throw ConfigError("preset", "unknown preset '" + name + "'");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Validation

/// Throws ConfigError naming the field on a hard violation; returns warnings.
inline std::vector<std::string> validate(const ExperimentConfig& c,
                                         const PhysicalConstants& k = default_constants()) {
    auto positive = [](double v, const char* f) {
        if (!(v > 0) || !std::isfinite(v)) throw ConfigError(f, "must be positive");
    };
    positive(c.sigma_x, "sigma_x");
    positive(c.sigma_y, "sigma_y");
    if (!(c.l_x >= 0)) throw ConfigError("l_x", "must be non-negative");
    if (!(c.l_y >= 0)) throw ConfigError("l_y", "must be non-negative");
    if (!std::isfinite(c.u_x)) throw ConfigError("u_x", "must be finite");
    if (!std::isfinite(c.u_y)) throw ConfigError("u_y", "must be finite");
    if (!(std::abs(c.eta) <= 1.0)) throw ConfigError("eta", "must lie in [-1, 1]");
    if (c.n_events < 1) throw ConfigError("n_events", "must be at least 1");
    if (!(c.t_max >= 0)) throw ConfigError("t_max", "must be non-negative (0 = automatic)");
    if (c.workers < 1) throw ConfigError("workers", "must be at least 1");
    if (k.species_mass.find(c.species) == k.species_mass.end())
        throw ConfigError("species", "unknown species '" + c.species + "'");
    if (!(c.integrator.rtol > 0)) throw ConfigError("rtol", "must be positive");
    if (!(c.integrator.atol > 0)) throw ConfigError("atol", "must be positive");
    if (!(c.integrator.dt_min > 0)) throw ConfigError("dt_min", "must be positive");
    if (!(c.integrator.h0 > 0)) throw ConfigError("h0", "must be positive");
    if (c.integrator.max_knots < 2) throw ConfigError("max_knots", "must be at least 2");
    if (!(c.abr.kappa_over_kappa0 > 0)) throw ConfigError("kappa", "must be positive");
    if (c.abr.n_grid < 256) throw ConfigError("n_grid", "must be at least 256");
    if (!(c.abr.dt >= 0)) throw ConfigError("abr.dt", "must be non-negative (0 = automatic)");
    if (!(c.abr.t_max >= 0)) throw ConfigError("abr.t_max", "must be non-negative (0 = automatic)");
    if (c.abr.grid_steps_per_half_step < 1)
        throw ConfigError("grid_steps_per_half_step", "must be at least 1");

    std::vector<std::string> warnings;
    const double lowest = -c.l_y;
    if (!(c.y_left < lowest))
        warnings.push_back("y_left is not below the lowest slit centre; particles may never fall onto it");
    if (!(c.y_right < lowest))
        warnings.push_back("y_right is not below the lowest slit centre; particles may never fall onto it");
    return warnings;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline void assign_key(ExperimentConfig& c, const std::string& section, const std::string& key,
                       const std::string& value) {
    using D = Dimension;
    auto q = [&](D d) { return parse_quantity(value, d); };
    const std::string sk = section + "." + key;
    if (sk == "experiment.species") c.species = trim(value);
    else if (sk == "experiment.eta") c.eta = trim(value).empty() ? -1.0 : q(D::none);
    else if (sk == "experiment.sigma_x") c.sigma_x = q(D::length);
    else if (sk == "experiment.sigma_y") c.sigma_y = q(D::length);
    else if (sk == "experiment.l_x") c.l_x = q(D::length);
    else if (sk == "experiment.l_y") c.l_y = q(D::length);
    else if (sk == "experiment.u_x") c.u_x = q(D::velocity);
    else if (sk == "experiment.u_y") c.u_y = q(D::velocity);
    else if (sk == "screens.y_left") c.y_left = q(D::length);
    else if (sk == "screens.y_right") c.y_right = q(D::length);
    else if (sk == "screens.x_split") c.x_split = q(D::length);
    else if (sk == "screens.t_max") c.t_max = q(D::time);
    else if (sk == "run.n_events") c.n_events = parse_count(value);
    else if (sk == "run.seed") c.seed = parse_count(value);
    else if (sk == "run.collapse") c.collapse_enabled = parse_flag(value);
    else if (sk == "run.workers") c.workers = static_cast<unsigned>(parse_count(value));
    else if (sk == "integrator.rtol") c.integrator.rtol = q(D::none);
    else if (sk == "integrator.atol") c.integrator.atol = q(D::length);
    else if (sk == "integrator.dt_min") c.integrator.dt_min = q(D::time);
    else if (sk == "integrator.h0") c.integrator.h0 = q(D::time);
    else if (sk == "integrator.node_epsilon") c.integrator.node_epsilon = q(D::none);
    else if (sk == "integrator.max_knots") c.integrator.max_knots = parse_count(value);
    else if (sk == "integrator.full_trajectory") c.integrator.full_trajectory = parse_flag(value);
    else if (sk == "abr.kappa") c.abr.kappa_over_kappa0 = q(D::none);
    else if (sk == "abr.n_grid") c.abr.n_grid = static_cast<int>(parse_count(value));
    else if (sk == "abr.dt") c.abr.dt = q(D::time);
    else if (sk == "abr.t_max") c.abr.t_max = q(D::time);
    else if (sk == "abr.grid_steps_per_half_step")
        c.abr.grid_steps_per_half_step = static_cast<int>(parse_count(value));
    else if (sk == "abr.survival_cadence") c.abr.survival_cadence = q(D::time);
    else throw ConfigError(key, "unknown key in section [" + section + "]");
}

}  // namespace detail

/// Parses a configuration document. Deterministic in its input text.
inline ExperimentConfig load_config(const std::string& text) {
    ExperimentConfig c;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    bool any_key = false;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = "line " + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("", where + ": unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (section != "experiment" && section != "screens" && section != "run" &&
                section != "integrator" && section != "abr")
                throw ConfigError("", where + ": unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("", where + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("", where + ": empty key");
        if (section.empty()) throw ConfigError(key, where + ": key outside of any [section]");
        try {
            if (section == "run" && key == "preset") {
                if (any_key) throw ConfigError(key, "preset must precede other keys");
                c = preset(value);
            } else {
                detail::assign_key(c, section, key, value);
            }
        } catch (const ConfigError& e) {
            throw ConfigError(e.field(), where + ": " + std::string(e.what()));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key, where + ": " + e.what());
        }
        any_key = true;
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config", "cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return load_config(ss.str());
}

/// Applies `key=value` (as used by --sweep) to a config.
inline void apply_override(ExperimentConfig& c, const std::string& key, const std::string& value) {
    static const std::map<std::string, std::string> section_of = {
        {"species", "experiment"}, {"eta", "experiment"},     {"sigma_x", "experiment"},
        {"sigma_y", "experiment"}, {"l_x", "experiment"},     {"l_y", "experiment"},
        {"u_x", "experiment"},     {"u_y", "experiment"},     {"y_left", "screens"},
        {"y_right", "screens"},    {"x_split", "screens"},    {"t_max", "screens"},
        {"n_events", "run"},       {"seed", "run"},           {"collapse", "run"},
        {"workers", "run"},        {"kappa", "abr"},
    };
    auto it = section_of.find(key);
    if (it == section_of.end()) throw ConfigError(key, "cannot be overridden");
    try {
        detail::assign_key(c, it->second, key, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(key, e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON echo

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    j["preset"] = c.preset;
    j["experiment"] = {{"species", c.species}, {"eta", c.eta},         {"sigma_x_m", c.sigma_x},
                       {"sigma_y_m", c.sigma_y}, {"l_x_m", c.l_x},       {"l_y_m", c.l_y},
                       {"u_x_m_per_s", c.u_x},  {"u_y_m_per_s", c.u_y}};
    j["screens"] = {{"y_left_m", c.y_left}, {"y_right_m", c.y_right}, {"x_split_m", c.x_split},
                    {"t_max_s", c.t_max}};
    j["run"] = {{"n_events", c.n_events}, {"seed", c.seed}, {"collapse", c.collapse_enabled}};
    j["integrator"] = {{"rtol", c.integrator.rtol},       {"atol_m", c.integrator.atol},
                       {"dt_min_s", c.integrator.dt_min}, {"h0_s", c.integrator.h0},
                       {"node_epsilon", c.integrator.node_epsilon},
                       {"max_knots", c.integrator.max_knots}};
    j["abr"] = {{"kappa_over_kappa0", c.abr.kappa_over_kappa0}, {"n_grid", c.abr.n_grid},
                {"dt_s", c.abr.dt}, {"t_max_s", c.abr.t_max},
                {"grid_steps_per_half_step", c.abr.grid_steps_per_half_step}};
    return j;
}

// ---------------------------------------------------------------------------
// Internal units

struct InternalIntegrator {
    double rtol, atol, dt_min, h0, node_epsilon;
    std::size_t max_knots;
    bool full_trajectory;
};

/// The experiment in internal units (um, ms, 1e-27 kg).
struct InternalConfig {
    double hbar, g, mass;
    double sigma_x, sigma_y, l_x, l_y, u_x, u_y, eta;
    double y_left, y_right, x_split, t_max;
    std::size_t n_events;
    std::uint64_t seed;
    bool collapse_enabled;
    unsigned workers;
    InternalIntegrator integrator;
    double abr_kappa_over_kappa0;
    int abr_n_grid;
    double abr_dt, abr_t_max;
    int abr_grid_steps_per_half_step;
    double abr_survival_cadence;
    std::string species;
    std::string preset;
};

/// Classical time to fall `drop` (>= 0) from rest.
inline double fall_time(double drop, double g) { return std::sqrt(2.0 * drop / g); }

inline InternalConfig to_internal_units(const ExperimentConfig& c,
                                        const PhysicalConstants& k = default_constants()) {
    const auto ik = to_internal(k);
    InternalConfig r{};
    r.hbar = ik.hbar;
    r.g = ik.g;
    r.mass = k.mass_of(c.species) * scale::mass;
    r.sigma_x = c.sigma_x * scale::length;
    r.sigma_y = c.sigma_y * scale::length;
    r.l_x = c.l_x * scale::length;
    r.l_y = c.l_y * scale::length;
    r.u_x = c.u_x * scale::velocity;
    r.u_y = c.u_y * scale::velocity;
    r.eta = c.eta;
    r.y_left = c.y_left * scale::length;
    r.y_right = c.y_right * scale::length;
    r.x_split = c.x_split * scale::length;
    r.t_max = c.t_max * scale::time;
    r.n_events = c.n_events;
    r.seed = c.seed;
    r.collapse_enabled = c.collapse_enabled;
    r.workers = c.workers;
    r.integrator = {c.integrator.rtol,         c.integrator.atol * scale::length,
                    c.integrator.dt_min * scale::time, c.integrator.h0 * scale::time,
                    c.integrator.node_epsilon, c.integrator.max_knots,
                    c.integrator.full_trajectory};
    r.abr_kappa_over_kappa0 = c.abr.kappa_over_kappa0;
    r.abr_n_grid = c.abr.n_grid;
    r.abr_dt = c.abr.dt * scale::time;
    r.abr_t_max = c.abr.t_max * scale::time;
    r.abr_grid_steps_per_half_step = c.abr.grid_steps_per_half_step;
    r.abr_survival_cadence = c.abr.survival_cadence * scale::time;
    r.species = c.species;
    r.preset = c.preset;
    return r;
}

inline ExperimentConfig from_internal_units(const InternalConfig& r) {
    ExperimentConfig c;
    c.preset = r.preset;
    c.species = r.species;
    c.sigma_x = r.sigma_x / scale::length;
    c.sigma_y = r.sigma_y / scale::length;
    c.l_x = r.l_x / scale::length;
    c.l_y = r.l_y / scale::length;
    c.u_x = r.u_x / scale::velocity;
    c.u_y = r.u_y / scale::velocity;
    c.eta = r.eta;
    c.y_left = r.y_left / scale::length;
    c.y_right = r.y_right / scale::length;
    c.x_split = r.x_split / scale::length;
    c.t_max = r.t_max / scale::time;
    c.n_events = r.n_events;
    c.seed = r.seed;
    c.collapse_enabled = r.collapse_enabled;
    c.workers = r.workers;
    c.integrator = {r.integrator.rtol,
                    r.integrator.atol / scale::length,
                    r.integrator.dt_min / scale::time,
                    r.integrator.h0 / scale::time,
                    r.integrator.node_epsilon,
                    r.integrator.max_knots,
                    r.integrator.full_trajectory};
    c.abr.kappa_over_kappa0 = r.abr_kappa_over_kappa0;
    c.abr.n_grid = r.abr_n_grid;
    c.abr.dt = r.abr_dt / scale::time;
    c.abr.t_max = r.abr_t_max / scale::time;
    c.abr.grid_steps_per_half_step = r.abr_grid_steps_per_half_step;
    c.abr.survival_cadence = r.abr_survival_cadence / scale::time;
    return c;
}

/// Horizon actually used: explicit t_max, or twice the classical fall time
/// from the upper slit to the lower screen (1 s without gravity).
inline double effective_t_max(const InternalConfig& c) {
    if (c.t_max > 0) return c.t_max;
    if (!(c.g > 0)) return 1000.0;
    const double drop = std::max(c.l_y - std::min(c.y_left, c.y_right), 0.0);
    return 2.0 * fall_time(drop, c.g) + 1.0;
}

}  // namespace arrival
