#include "helix/config.hpp"

#include "helix/error.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace helix {

namespace {

struct KeySpec {
    const char * key;
    const char * env;
    const char * builtin;
};

// Flag spelling, environment variable, builtin default.
const KeySpec k_keys[] = {
    {"tau0",          "HELIX_TAU0",          "0.5"},
    {"gamma",         "HELIX_GAMMA",         "0.5"},
    {"t-base",        "HELIX_TBASE",         "0.7"},
    {"kappa",         "HELIX_KAPPA",         "2.0"},
    {"t-c",           "HELIX_TC",            "1.5"},
    {"penalty-scale", "HELIX_PENALTY_SCALE", "4.0"},
    {"sd-agg",        "HELIX_SD_AGG",        "mean"},
    {"penalty-shape", "HELIX_PENALTY_SHAPE", "boundary_continuous"},
};

std::string trim(const std::string & s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string & key, const std::string & value) {
    try {
        size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(v)) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception &) {
        throw bad_input("config: bad numeric value for " + key + ": '" + value + "'");
    }
}

} // namespace

const char * config_source_name(ConfigSource s) {
    switch (s) {
        case ConfigSource::builtin: return "default";
        case ConfigSource::file:    return "file";
        case ConfigSource::env:     return "env";
        case ConfigSource::flag:    return "flag";
    }
    return "?";
}

const std::vector<std::string> & ConfigResolver::steering_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> v;
        for (const auto & k : k_keys) v.push_back(k.key);
        return v;
    }();
    return keys;
}

ConfigResolver::ConfigResolver() {
    for (const auto & k : k_keys) {
        values_[k.key] = {k.builtin, ConfigSource::builtin};
    }
}

void ConfigResolver::set(const std::string & key, const std::string & value, ConfigSource src) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw bad_input("config: unknown key '" + key + "'");
    }
    // Precedence: builtin < file < env < flag. Lower layers never clobber.
    if (int(src) >= int(it->second.source)) {
        it->second = {value, src};
    }
}

void ConfigResolver::load_file(const std::string & path) {
    std::ifstream in(path);
    if (!in) {
        throw io_error("config: cannot open " + path);
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw bad_input("config: " + path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), ConfigSource::file);
    }
}

void ConfigResolver::apply_env() {
    for (const auto & k : k_keys) {
        if (const char * v = std::getenv(k.env)) {
            set(k.key, v, ConfigSource::env);
        }
    }
}

void ConfigResolver::set_flag(const std::string & key, const std::string & value) {
    set(key, value, ConfigSource::flag);
}

const ResolvedValue & ConfigResolver::get(const std::string & key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw bad_input("config: unknown key '" + key + "'");
    }
    return it->second;
}

SteeringConfig ConfigResolver::steering() const {
    SteeringConfig cfg;
    cfg.tau0 = parse_double("tau0", get("tau0").value);
    cfg.gamma = parse_double("gamma", get("gamma").value);
    cfg.t_base = parse_double("t-base", get("t-base").value);
    cfg.handover.kappa = parse_double("kappa", get("kappa").value);
    cfg.handover.t_c = parse_double("t-c", get("t-c").value);
    cfg.penalty_scale = parse_double("penalty-scale", get("penalty-scale").value);
    cfg.sd_aggregation = parse_sd_aggregation(get("sd-agg").value);
    cfg.penalty_shape = parse_penalty_shape(get("penalty-shape").value);
    cfg.validate();
    return cfg;
}

std::string ConfigResolver::provenance_header() const {
    std::string s;
    for (const auto & k : k_keys) {
        const auto & rv = get(k.key);
        s += "# ";
        s += k.key;
        s += ' ';
        s += rv.value;
        s += " source=";
        s += config_source_name(rv.source);
        s += '\n';
    }
    return s;
}

SdAggregation parse_sd_aggregation(const std::string & s) {
    if (s == "mean") return SdAggregation::mean;
    if (s == "min") return SdAggregation::min;
    if (s == "max") return SdAggregation::max;
    throw bad_input("config: sd-agg must be mean|min|max, got '" + s + "'");
}

PenaltyShape parse_penalty_shape(const std::string & s) {
    if (s == "paper_literal") return PenaltyShape::paper_literal;
    if (s == "boundary_continuous") return PenaltyShape::boundary_continuous;
    throw bad_input("config: penalty-shape must be paper_literal|boundary_continuous, got '" + s + "'");
}

const char * sd_aggregation_name(SdAggregation m) {
    switch (m) {
        case SdAggregation::mean: return "mean";
        case SdAggregation::min:  return "min";
        case SdAggregation::max:  return "max";
    }
    return "?";
}

const char * penalty_shape_name(PenaltyShape p) {
    switch (p) {
        case PenaltyShape::paper_literal:       return "paper_literal";
        case PenaltyShape::boundary_continuous: return "boundary_continuous";
    }
    return "?";
}

std::vector<double> parse_temperature_grid(const std::string & text) {
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        // start:stop:step, inclusive arithmetic grid
        double start = 0, stop = 0, step = 0;
        std::istringstream ss(text);
        std::string a, b, c;
        if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c)) {
            throw bad_input("grid: expected start:stop:step, got '" + text + "'");
        }
        start = parse_double("grid", a);
        stop = parse_double("grid", b);
        step = parse_double("grid", c);
        if (!(step > 0.0) || stop < start) {
            throw bad_input("grid: need step > 0 and stop >= start");
        }
        const long count = std::lround((stop - start) / step) + 1;
        for (long k = 0; k < count; ++k) {
            const double t = start + double(k) * step;
            if (t > stop + 1e-9) break;
            grid.push_back(t);
        }
    } else {
        std::istringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            if (!part.empty()) {
                grid.push_back(parse_double("grid", part));
            }
        }
    }
    if (grid.empty()) {
        throw bad_input("grid: no temperatures in '" + text + "'");
    }
    for (double t : grid) {
        if (!(t > 0.0)) {
            throw bad_input("grid: temperatures must be > 0");
        }
    }
    return grid;
}

} // namespace helix
