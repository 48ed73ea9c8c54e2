#pragma once

// Layered CLI configuration: flags > NVSCOPE_* environment > TOML file > defaults.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "nvscope/physics.hpp"
#include "nvscope/pll.hpp"
#include "nvscope/spectrum.hpp"
#include "nvscope/transport.hpp"

namespace nvscope::cli {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat "section.key" -> raw value text.
using Settings = std::map<std::string, std::string>;

struct CliConfig {
    pll::PllConfig pll;
    physics::NvParameters nv;
    SweepPlan sweep;
    SerialSettings serial;
    std::chrono::milliseconds timeout{2000};

    /// Module invariants of every section; throws ConfigError.
    void validate() const;
};

/// Every recognised "section.key".
const std::map<std::string, std::string>& known_keys();

/// Small TOML subset: [section] headers, key = value with strings, booleans,
/// integers and floats, '#' comments. Throws ConfigError("line N: ...").
Settings parse_toml(const std::string& text);

Settings load_toml_file(const std::string& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

EnvLookup process_env();

/// NVSCOPE_<SECTION>_<KEY> for every known key, plus NVSCOPE_PORT for serial.port.
Settings settings_from_env(const EnvLookup& env);

/// Applies settings on top of cfg; unknown keys and malformed values throw ConfigError.
void apply_settings(CliConfig& cfg, const Settings& settings);

}  // namespace nvscope::cli
