// Flat line-oriented run configuration: one `key = value` per line, lists as
// comma- or space-separated values, `#` comments. The format round-trips
// losslessly through serialize()/parse.

#ifndef MISIM_CONFIG_HPP
#define MISIM_CONFIG_HPP

#include <cstdint>
#include <string>

#include "misim/imputers.hpp"
#include "misim/mcengine.hpp"

namespace misim::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::uint64_t seed = 241103414ULL;
    mc::GridSpec grid;  // defaults: the single smoke scenario
    imputers::ImputerParams imputer;
    int workers = 1;
    bool allow_custom = false;
    bool keep_replicates = false;
    bool dump_data = false;
    bool dump_fits = false;

    RunConfig();

    /// Expanded, validated scenario list.
    std::vector<mc::Scenario> scenarios() const;
};

/// Parses a config file. Unknown keys are rejected with a nearest-key hint;
/// factor values outside the design grid are rejected unless allow_custom.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);

/// Inverse of parse_config_text: parse(serialize(c)) == c.
std::string serialize(const RunConfig& c);

}  // namespace misim::config

#endif
