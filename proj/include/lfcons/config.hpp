#pragma once

// JSON configuration files for the CLI. See configs/*.json and README.md for
// the schema. Comments are not accepted.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "lfcons/simulation.hpp"
#include "lfcons/windfarm.hpp"

namespace lfcons {

struct OutputPaths {
  std::string trajectory = "trajectory.csv";
  std::string report = "report.json";
  std::string report_text = "report.txt";
  std::string manifest = "manifest.json";
};

struct ScenarioFile {
  WindFarmScenario scenario;
  OutputPaths outputs;
};

struct SweepOutputs {
  std::string points = "sweep.csv";
  std::string brackets = "sweep_brackets.csv";
  std::string manifest = "sweep_manifest.json";
};

struct SweepFile {
  SweepConfig sweep;
  SweepOutputs outputs;
};

/// Throws ConfigError with the offending line (syntax) or field (schema).
ScenarioFile parse_scenario(const std::string& text);
ScenarioFile load_scenario(const std::filesystem::path& path);

SweepFile parse_sweep(const std::string& text);
SweepFile load_sweep(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace lfcons
