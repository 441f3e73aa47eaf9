#include "lfcons/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "lfcons/config.hpp"
#include "lfcons/io.hpp"

namespace lfcons::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

void prepare_out_dir(const GlobalOptions& opts) { fs::create_directories(opts.out_dir); }

std::string absolute_string(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

}  // namespace

int cmd_simulate(const fs::path& config, const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  ScenarioFile file;
  try {
    file = load_scenario(config);
    if (opts.seed) {
      file.scenario.wind.seed = *opts.seed;
    }
  } catch (const ConfigError& e) {
    err << config.string() << ": " << e.what() << "\n";
    return kBadConfig;
  }
  const auto& sc = file.scenario;
  prepare_out_dir(opts);

  RunManifest manifest;
  manifest.command = "simulate";
  manifest.config_path = absolute_string(config);
  manifest.config_hash = sha256_file(config);

  int code = kOk;
  try {
    const auto traj = simulate(sc);
    write_trajectory_csv(traj, opts.out_dir / file.outputs.trajectory);
    manifest.outputs.push_back(file.outputs.trajectory);

    const auto report = fairness_report(sc, traj);
    auto j = to_json(report);
    j["seed"] = sc.wind.seed;
    j["wind_kind"] = to_string(sc.wind.kind);
    write_text(opts.out_dir / file.outputs.report, j.dump(2) + "\n");
    write_text(opts.out_dir / file.outputs.report_text, to_text(report));
    manifest.outputs.push_back(file.outputs.report);
    manifest.outputs.push_back(file.outputs.report_text);
    if (!opts.quiet) out << to_text(report);
    const bool settled = std::isfinite(report.settling_time);
    code = report.fair && settled ? kOk : kUnfair;
  } catch (const DivergenceError& e) {
    nlohmann::json j{{"fault", "divergence"}, {"time", e.time()}, {"message", e.what()}};
    write_text(opts.out_dir / file.outputs.report, j.dump(2) + "\n");
    manifest.outputs.push_back(file.outputs.report);
    err << "simulation fault: " << e.what() << "\n";
    code = kFault;
  }
  manifest.wall_clock_seconds = seconds_since(start);
  write_manifest(manifest, opts.out_dir / file.outputs.manifest);
  return code;
}

int cmd_certify(int n, const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  if (n < 2) {
    err << "certify: n must be >= 2 (got " << n << ")\n";
    return kBadConfig;
  }
  StabilityCertificate cert;
  try {
    cert = constructive_pq(n);
  } catch (const std::exception& e) {
    err << "certify: internal error: " << e.what() << "\n";
    return kFault;
  }
  prepare_out_dir(opts);
  const std::string stem = "certificate_n" + std::to_string(n);
  write_text(opts.out_dir / (stem + ".json"), to_json(cert).dump(2) + "\n");
  write_text(opts.out_dir / (stem + ".txt"), to_text(cert));
  if (!opts.quiet) out << to_text(cert);

  RunManifest manifest;
  manifest.command = "certify";
  manifest.config_hash = sha256_hex("certify --n " + std::to_string(n));
  manifest.outputs = {stem + ".json", stem + ".txt"};
  manifest.wall_clock_seconds = seconds_since(start);
  write_manifest(manifest, opts.out_dir / (stem + "_manifest.json"));

  if (!cert.routes_agree()) {
    err << "certify: scalar inequalities and Cholesky verdict disagree\n";
    return kFault;
  }
  return cert.valid ? kOk : kFault;
}

int cmd_sweep(const fs::path& config, const GlobalOptions& opts, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  SweepFile file;
  try {
    file = load_sweep(config);
  } catch (const ConfigError& e) {
    err << config.string() << ": " << e.what() << "\n";
    return kBadConfig;
  }
  prepare_out_dir(opts);
  const auto report = epsilon_sweep(file.sweep);
  {
    std::ofstream f(opts.out_dir / file.outputs.points);
    write_sweep_csv(report, f);
  }
  {
    std::ofstream f(opts.out_dir / file.outputs.brackets);
    write_bracket_csv(report, f);
  }
  if (!opts.quiet) {
    out << "Empirical epsilon* brackets (grid-based, not a certified bound)\n";
    write_bracket_csv(report, out);
  }
  RunManifest manifest;
  manifest.command = "sweep";
  manifest.config_path = absolute_string(config);
  manifest.config_hash = sha256_file(config);
  manifest.outputs = {file.outputs.points, file.outputs.brackets};
  manifest.wall_clock_seconds = seconds_since(start);
  write_manifest(manifest, opts.out_dir / file.outputs.manifest);
  return kOk;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Leader-follower sum-constrained consensus: simulation and stability certificates"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  app.add_option("--out-dir", out_dir, "Directory for output files");
  auto* seed_opt = app.add_option("--seed", seed, "Override the wind noise seed");
  app.add_flag("--quiet", opts.quiet, "Suppress report printing");

  std::string sim_cfg;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a wind-farm scenario");
  simulate_cmd->add_option("config", sim_cfg, "Scenario JSON")->required();

  int n = 0;
  auto* certify_cmd = app.add_subcommand("certify", "Build and check the delay-independent certificate");
  certify_cmd->add_option("--n", n, "Agent count")->required();

  std::string sweep_cfg;
  auto* sweep_cmd = app.add_subcommand("sweep", "Empirical epsilon sweep");
  sweep_cmd->add_option("config", sweep_cfg, "Sweep JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kBadConfig;
  }
  opts.out_dir = out_dir;
  if (seed_opt->count() > 0) opts.seed = seed;

  try {
    if (*simulate_cmd) return cmd_simulate(sim_cfg, opts, out, err);
    if (*certify_cmd) return cmd_certify(n, opts, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep_cfg, opts, out, err);
  } catch (const ConfigError& e) {
    err << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFault;
  }
  return kBadConfig;
}

}  // namespace lfcons::cli
