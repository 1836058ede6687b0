#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsep/montecarlo.hpp"
#include "fsep/sim.hpp"

namespace fsep {

/// Everything a scenario file can configure.
struct ScenarioFile {
  Scenario scenario;
  MonteCarloConfig montecarlo;
};

/// The full schema with default values; every accepted key appears here.
nlohmann::json default_config();

nlohmann::json to_json(const ScenarioFile& file);

/// Strict conversion; every key must be known and every value well typed.
ScenarioFile from_json(const nlohmann::json& j);

/// Parses JSON text. Syntax errors raise ConfigError naming line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source);

/// Recursively overlays `patch` on `base`. Keys absent from `base` are rejected.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& path = "");

/// Applies one "dotted.path=value" override. The value is read as JSON when it
/// parses, otherwise as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Defaults, then the file (when a path is given), then the overrides.
ScenarioFile load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

}  // namespace fsep
