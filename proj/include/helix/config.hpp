#pragma once

#include "helix/steering.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace helix {

// Where a resolved value came from. Precedence: builtin < file < env < flag.
enum class ConfigSource {
    builtin,
    file,
    env,
    flag,
};

const char * config_source_name(ConfigSource s);

struct ResolvedValue {
    std::string value;
    ConfigSource source = ConfigSource::builtin;
};

// Layered key/value resolution for the steering tunables. Keys use flag
// spelling (tau0, gamma, t-base, kappa, t-c, penalty-scale, penalty-shape,
// sd-agg); environment variables are the HELIX_* uppercase forms.
class ConfigResolver {
  public:
    ConfigResolver(); // seeds the builtin defaults

    // Flat key/value file: one `key = value` per line, '#' comments. Throws
    // bad_input on unknown keys or parse failures.
    void load_file(const std::string & path);

    // Reads HELIX_TAU0 and friends from the process environment.
    void apply_env();

    // Highest-precedence layer: explicit command-line flags.
    void set_flag(const std::string & key, const std::string & value);

    const ResolvedValue & get(const std::string & key) const;

    // Builds and validates the SteeringConfig from the resolved values.
    SteeringConfig steering() const;

    // One "# key value source" line per tunable; printed with every run so
    // a run is reconstructible from its header.
    std::string provenance_header() const;

    static const std::vector<std::string> & steering_keys();

  private:
    void set(const std::string & key, const std::string & value, ConfigSource src);
    std::map<std::string, ResolvedValue> values_;
};

SdAggregation parse_sd_aggregation(const std::string & s); // mean|min|max
PenaltyShape parse_penalty_shape(const std::string & s);   // paper_literal|boundary_continuous
const char * sd_aggregation_name(SdAggregation m);
const char * penalty_shape_name(PenaltyShape p);

// Sweep grid syntax: either "start:stop:step" (inclusive arithmetic grid)
// or a comma-separated list. Throws bad_input on malformed input.
std::vector<double> parse_temperature_grid(const std::string & text);

} // namespace helix
