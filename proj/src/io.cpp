#include "lfcons/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "lfcons/config.hpp"

namespace lfcons {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  while (true) {
    const auto pos = rest.find(',');
    out.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ConfigError("CSV line " + std::to_string(line_no) + ": cannot parse '" + s + "'");
  }
  return v;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string check_family_label(const InequalityCheck& c) {
  if (c.family == "q_minus_2p") return "q_" + std::to_string(c.index) + " - 2p_" + std::to_string(c.index);
  if (c.family == "schur_chain") {
    const auto i = std::to_string(c.index), j = std::to_string(c.index + 1);
    return "-q_" + i + " + p_" + j + "^2/(2p_" + j + " - q_" + j + ")";
  }
  if (c.family == "schur_tail") return "-q_" + std::to_string(c.index);
  if (c.family == "p_positive") return "p_" + std::to_string(c.index);
  return "q_" + std::to_string(c.index);
}

std::string vec_text(const Vector& v) {
  std::ostringstream os;
  os << "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << format_double(v(i));
  os << "]";
  return os.str();
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const auto dim = traj.states.empty() ? 0 : traj.states.front().size();
  std::vector<std::string> cols = traj.columns;
  if (cols.empty() && dim > 0) {
    cols.push_back("xi_h");
    for (Eigen::Index i = 1; i < dim; ++i) cols.push_back("z_" + std::to_string(i));
  }
  if (!traj.states.empty() && static_cast<Eigen::Index>(cols.size()) != dim) {
    throw ConfigError("trajectory column names do not match the state dimension");
  }
  out << "t";
  for (const auto& c : cols) out << ',' << c;
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_double(traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) out << ',' << format_double(traj.states[k](i));
    out << '\n';
  }
}

void write_trajectory_csv(const Trajectory& traj, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trajectory_csv(traj, out);
}

Trajectory read_trajectory_csv(std::istream& in) {
  Trajectory traj;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV is empty");
  auto header = split_csv(line);
  if (header.empty() || header.front() != "t") throw ConfigError("CSV header must start with 't'");
  traj.columns.assign(header.begin() + 1, header.end());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) {
      throw ConfigError("CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    traj.times.push_back(parse_double(cells[0], line_no));
    Vector s(static_cast<Eigen::Index>(cells.size() - 1));
    for (std::size_t i = 1; i < cells.size(); ++i) s(static_cast<Eigen::Index>(i - 1)) = parse_double(cells[i], line_no);
    traj.states.push_back(std::move(s));
  }
  return traj;
}

Trajectory read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_trajectory_csv(in);
}

json to_json(const StabilityCertificate& cert) {
  json checks = json::array();
  for (const auto& c : cert.checks) {
    checks.push_back({{"family", c.family},
                      {"index", c.index},
                      {"expression", check_family_label(c)},
                      {"relation", c.negative ? "< 0" : "> 0"},
                      {"value", number_or_null(c.value)},
                      {"pass", c.pass}});
  }
  return json{{"n", cert.n},
              {"p", std::vector<double>(cert.p.data(), cert.p.data() + cert.p.size())},
              {"q", std::vector<double>(cert.q.data(), cert.q.data() + cert.q.size())},
              {"schur_diagonal", std::vector<double>(cert.schur_diagonal.data(),
                                                     cert.schur_diagonal.data() + cert.schur_diagonal.size())},
              {"checks", checks},
              {"cholesky_neg_q1_tilde", cert.cholesky_ok},
              {"min_eigenvalue_neg_q1_tilde", cert.min_eig_neg_q1},
              {"routes_agree", cert.routes_agree()},
              {"lyapunov_q", "identity"},
              {"margin", kCertificateMargin},
              {"valid", cert.valid}};
}

std::string to_text(const StabilityCertificate& cert) {
  std::ostringstream os;
  os << "Delay-independent stability certificate, n = " << cert.n << "\n";
  os << "  p = " << vec_text(cert.p) << "\n";
  os << "  q = " << vec_text(cert.q) << "\n";
  os << "  S1 diag = " << vec_text(cert.schur_diagonal) << "\n";
  for (const auto& c : cert.checks) {
    os << "  [" << (c.pass ? "ok  " : "FAIL") << "] " << std::left << std::setw(34)
       << check_family_label(c) << " = " << format_double(c.value) << (c.negative ? "  (< 0)" : "  (> 0)")
       << "\n";
  }
  os << "  Cholesky(-Q1_tilde): " << (cert.cholesky_ok ? "ok" : "failed") << "\n";
  os << "  min eig(-Q1_tilde) = " << format_double(cert.min_eig_neg_q1) << "\n";
  os << "  Lyapunov P for A_f (Q = I) diag = " << vec_text(cert.lyapunov_p.diagonal()) << "\n";
  os << "  valid: " << (cert.valid ? "yes" : "no") << "\n";
  return os.str();
}

json to_json(const FairnessReport& r) {
  return json{{"window", {r.window_start, r.window_end}},
              {"p_d", r.p_d},
              {"z_star", r.z_star},
              {"spread", r.spread},
              {"sum_storage", r.sum_storage},
              {"mismatch", r.mismatch},
              {"tracking_gap", r.tracking_gap},
              {"mean_spread", r.mean_spread},
              {"mean_mismatch", r.mean_mismatch},
              {"max_spread", r.max_spread},
              {"max_mismatch", r.max_mismatch},
              {"max_tracking_gap", r.max_tracking_gap},
              {"mean_storage", r.mean_storage},
              {"fairness_tol", r.fairness_tol},
              {"power_tol", r.power_tol},
              {"tracking_tol", r.tracking_tol},
              {"settling_time", number_or_null(r.settling_time)},
              {"tracking_ok", r.tracking_ok},
              {"fair", r.fair}};
}

std::string to_text(const FairnessReport& r) {
  std::ostringstream os;
  os << "Fairness report over [" << r.window_start << ", " << r.window_end << "] s\n"
     << "  P_d = " << r.p_d << " MW, z* = " << r.z_star << " MW\n"
     << "  storage sum = " << r.sum_storage << " MW, mean |x| = " << r.mean_storage << " MW\n"
     << "  spread = " << r.spread << " MW (max " << r.max_spread << ", tol " << r.fairness_tol << ")\n"
     << "  mismatch = " << r.mismatch << " MW (max " << r.max_mismatch << ", tol " << r.power_tol << ")\n"
     << "  max |x - z| = " << r.max_tracking_gap << " MW (" << (r.tracking_ok ? "ok" : "FAIL") << ")\n"
     << "  settling time = " << r.settling_time << " s\n"
     << "  fair: " << (r.fair ? "yes" : "no") << "\n";
  return os.str();
}

void write_sweep_csv(const SweepReport& report, std::ostream& out) {
  out << "epsilon,n,outcome,converged,settling_time,final_distance\n";
  for (const auto& p : report.points) {
    out << format_double(p.epsilon) << ',' << p.n << ',' << to_string(p.outcome) << ','
        << (p.outcome == SweepOutcome::converged ? 1 : 0) << ','
        << (std::isfinite(p.settling_time) ? format_double(p.settling_time) : "nan") << ','
        << (std::isfinite(p.final_distance) ? format_double(p.final_distance) : "inf") << '\n';
  }
}

std::string bracket_status(const SweepBracket& b) {
  if (!b.lower) return "none";
  return b.bracketed ? "bracketed" : "unbracketed";
}

void write_bracket_csv(const SweepReport& report, std::ostream& out) {
  out << "n,lower,upper,status,monotone\n";
  for (const auto& b : report.brackets) {
    out << b.n << ',' << (b.lower ? format_double(*b.lower) : "") << ','
        << (b.upper ? format_double(*b.upper) : "") << ',' << bracket_status(b) << ','
        << (b.monotone ? 1 : 0) << '\n';
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

json RunManifest::to_json() const {
  return json{{"command", command},           {"config_path", config_path},
              {"config_hash", config_hash},   {"tool_version", tool_version},
              {"wall_clock_seconds", wall_clock_seconds}, {"outputs", outputs}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_path = j.at("config_path").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

void write_manifest(const RunManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << manifest.to_json().dump(2) << '\n';
}

RunManifest read_manifest(const fs::path& path) {
  return RunManifest::from_json(json::parse(read_file(path)));
}

bool verify_manifest(const fs::path& manifest_path, std::string* why) {
  auto fail = [why](std::string msg) {
    if (why) *why = std::move(msg);
    return false;
  };
  RunManifest m;
  try {
    m = read_manifest(manifest_path);
  } catch (const std::exception& e) {
    return fail(std::string("unreadable manifest: ") + e.what());
  }
  if (!m.config_path.empty()) {
    std::error_code ec;
    if (!fs::exists(m.config_path, ec)) return fail("config file missing: " + m.config_path);
    if (sha256_file(m.config_path) != m.config_hash) return fail("config hash mismatch");
  }
  const auto dir = manifest_path.parent_path();
  for (const auto& o : m.outputs) {
    const auto p = dir / o;
    std::error_code ec;
    if (!fs::exists(p, ec) || fs::file_size(p, ec) == 0) return fail("missing or empty output: " + o);
  }
  return true;
}

}  // namespace lfcons
