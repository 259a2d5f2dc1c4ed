#pragma once

#include "oscmac/sim_engine.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace oscmac {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Invalid scenario document. The message starts with the JSON path of the offending field.
class ConfigError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Random placement in a width x height rectangle. The FR sits at the centre, the station with it.
struct GeneratorSpec
{
    std::uint32_t count{20};  ///< network nodes, station excluded
    double width{300.0};
    double height{300.0};
    std::optional<std::uint64_t> seed;  ///< defaults to the run seed
    Joules initial_energy{1.0};
    std::uint32_t trn_count{1};  ///< the nodes farthest from the FR become TRNs

    friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct ScenarioConfig
{
    SimulationConfig sim;                  ///< nodes stay empty when a generator is given
    std::optional<GeneratorSpec> generator;
    std::optional<std::string> trace_path;
    std::optional<std::string> metrics_path;

    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Parses and validates a scenario document, filling defaults. Unknown keys are rejected.
ScenarioConfig parse_config(std::string_view document);

/// Full document with every default written out. parse_config(to_json_text(c)) == c.
std::string to_json_text(const ScenarioConfig& config, bool pretty = false);

/// Key-sorted compact document used for hashing. The output section is left out;
/// `strip_mode` also drops mac.mode.
std::string canonical_text(const ScenarioConfig& config, bool strip_mode = false);

/// Lower-case hex SHA-256 of canonical_text.
std::string config_hash(const ScenarioConfig& config, bool strip_mode = false);

std::vector<NodeSpec> generate_nodes(const GeneratorSpec& spec, std::uint64_t seed);

/// Simulation input for one seed: generated nodes are materialised here.
SimulationConfig resolve(const ScenarioConfig& config, std::uint64_t seed);

} // namespace oscmac
