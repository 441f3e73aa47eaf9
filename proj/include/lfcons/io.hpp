#pragma once

// File formats: trajectory CSV, JSON/text reports and the run manifest.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfcons/simulation.hpp"
#include "lfcons/stability.hpp"
#include "lfcons/windfarm.hpp"

namespace lfcons {

inline constexpr const char* kToolVersion = "1.0.0";

/// Shortest decimal that round-trips: 17 significant digits.
std::string format_double(double v);

/// Header `t,xi_h,z_1,...,z_n[,x_1,...,x_n]`, one row per recorded sample.
/// Column names come from traj.columns when present.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path);
/// Inverse of write_trajectory_csv. Only times, states and columns are restored.
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

nlohmann::json to_json(const StabilityCertificate& cert);
std::string to_text(const StabilityCertificate& cert);

nlohmann::json to_json(const FairnessReport& report);
std::string to_text(const FairnessReport& report);

/// Points: `epsilon,n,outcome,converged,settling_time,final_distance`.
void write_sweep_csv(const SweepReport& report, std::ostream& out);
/// Brackets: `n,lower,upper,status,monotone` with status bracketed/unbracketed/none.
void write_bracket_csv(const SweepReport& report, std::ostream& out);
std::string bracket_status(const SweepBracket& bracket);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::string tool_version = kToolVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Hash of the config file still matches and every listed output exists and
/// is non-empty. Outputs are resolved relative to the manifest's directory.
bool verify_manifest(const std::filesystem::path& manifest_path, std::string* why = nullptr);

}  // namespace lfcons
