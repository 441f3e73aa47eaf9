#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace lfcons::cli {

enum ExitCode : int {
  kOk = 0,
  kBadConfig = 1,
  kFault = 2,      ///< simulation fault, or an internal inconsistency in certify
  kUnfair = 3,     ///< run finished but was unfair or never settled; data still written
};

struct GlobalOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;  ///< overrides wind.seed in scenario configs
  bool quiet = false;
};

int cmd_simulate(const std::filesystem::path& config, const GlobalOptions& opts, std::ostream& out,
                 std::ostream& err);
int cmd_certify(int n, const GlobalOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config, const GlobalOptions& opts, std::ostream& out,
              std::ostream& err);

/// Parses `[--out-dir DIR] [--seed N] [--quiet] <simulate CFG | certify --n N | sweep CFG>`.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace lfcons::cli
