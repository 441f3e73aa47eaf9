#include "lfcons/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace lfcons {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError("line " + std::to_string(line) + ": JSON syntax error: " + e.what());
  }
}

[[noreturn]] void field_error(const std::string& field, const std::string& msg) {
  throw ConfigError("field '" + field + "': " + msg);
}

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) field_error(where.empty() ? key : where + "." + key, "unknown field");
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) field_error(where.empty() ? key : where + "." + key, "missing required field");
  return obj.at(key);
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  return v.get<double>();
}

int as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) field_error(field, "expected an integer");
  return v.get<int>();
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  return as_number(obj.at(key), where.empty() ? key : where + "." + key);
}

std::string string_or(const json& obj, const std::string& key, const std::string& fallback,
                      const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) field_error(where + "." + key, "expected a string");
  return obj.at(key).get<std::string>();
}

Vector per_wg(const json& v, int n, const std::string& field) {
  if (v.is_number()) return Vector::Constant(n, v.get<double>());
  if (!v.is_array()) field_error(field, "expected a number or an array of n numbers");
  if (static_cast<int>(v.size()) != n) field_error(field, "array length must equal n = " + std::to_string(n));
  Vector out(n);
  for (int i = 0; i < n; ++i) out(i) = as_number(v.at(static_cast<std::size_t>(i)), field + "[" + std::to_string(i) + "]");
  return out;
}

WindProfile parse_wind(const json& w, int n) {
  if (!w.is_object()) field_error("wind", "expected an object");
  reject_unknown(w, "wind", {"kind", "pe", "pr", "amplitude", "period", "step_time", "step_delta",
                             "hold_time", "seed"});
  WindProfile p;
  const auto& kind = require(w, "kind", "wind");
  if (!kind.is_string()) field_error("wind.kind", "expected a string");
  try {
    p.kind = parse_wind_profile_kind(kind.get<std::string>());
  } catch (const ConfigError& e) {
    field_error("wind.kind", e.what());
  }
  p.pe_mean = per_wg(require(w, "pe", "wind"), n, "wind.pe");
  p.pr_mean = per_wg(require(w, "pr", "wind"), n, "wind.pr");
  p.amplitude = number_or(w, "amplitude", 0.0, "wind");
  p.period = number_or(w, "period", 1.0, "wind");
  p.step_time = number_or(w, "step_time", 0.0, "wind");
  p.step_delta = number_or(w, "step_delta", 0.0, "wind");
  p.hold_time = number_or(w, "hold_time", 0.1, "wind");
  if (w.contains("seed")) {
    if (!w.at("seed").is_number_unsigned() && !w.at("seed").is_number_integer()) {
      field_error("wind.seed", "expected a non-negative integer");
    }
    p.seed = w.at("seed").get<std::uint64_t>();
  }
  return p;
}

EventSchedule parse_schedule(const json& s, double* initial) {
  if (!s.is_array() || s.empty()) field_error("pd_schedule", "expected a non-empty array of [t, P_d] pairs");
  std::vector<Event> events;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto field = "pd_schedule[" + std::to_string(i) + "]";
    const auto& e = s[i];
    if (!e.is_array() || e.size() != 2) field_error(field, "expected [t, P_d]");
    events.push_back({as_number(e[0], field + "[0]"), as_number(e[1], field + "[1]")});
  }
  if (events.front().time == 0.0) *initial = events.front().value;
  try {
    return EventSchedule(std::move(events));
  } catch (const ConfigError& e) {
    field_error("pd_schedule", e.what());
  }
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioFile parse_scenario(const std::string& text) {
  const json j = parse_text(text);
  if (!j.is_object()) throw ConfigError("line 1: top level must be a JSON object");
  reject_unknown(j, "", {"n", "k_alpha", "t_storage", "dt", "t_end", "delay_r", "record_stride",
                         "link_delays", "pd_schedule", "initial_pd", "wind", "tolerances",
                         "fault_injection", "outputs", "description"});
  ScenarioFile f;
  auto& sc = f.scenario;
  sc.n = as_int(require(j, "n", ""), "n");
  if (sc.n < 2) field_error("n", "must be >= 2");
  sc.k_alpha = as_number(require(j, "k_alpha", ""), "k_alpha");
  sc.t_storage = as_number(require(j, "t_storage", ""), "t_storage");
  sc.sim.dt = as_number(require(j, "dt", ""), "dt");
  sc.sim.t_end = as_number(require(j, "t_end", ""), "t_end");
  sc.sim.delay_r = number_or(j, "delay_r", 0.0, "");
  sc.sim.record_stride = j.contains("record_stride") ? as_int(j.at("record_stride"), "record_stride") : 1;
  sc.delays = LinkDelays{sc.sim.delay_r, sc.sim.delay_r};
  if (j.contains("link_delays")) {
    const auto& ld = j.at("link_delays");
    if (!ld.is_object()) field_error("link_delays", "expected an object");
    reject_unknown(ld, "link_delays", {"neighbor", "aggregate"});
    sc.delays.neighbor = number_or(ld, "neighbor", sc.delays.neighbor, "link_delays");
    sc.delays.aggregate = number_or(ld, "aggregate", sc.delays.aggregate, "link_delays");
  }
  double initial = std::numeric_limits<double>::quiet_NaN();
  sc.pd_schedule = parse_schedule(require(j, "pd_schedule", ""), &initial);
  if (j.contains("initial_pd")) initial = as_number(j.at("initial_pd"), "initial_pd");
  if (std::isnan(initial)) field_error("initial_pd", "required when pd_schedule does not start at t = 0");
  sc.initial_pd = initial;
  sc.wind = parse_wind(require(j, "wind", ""), sc.n);

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    if (!t.is_object()) field_error("tolerances", "expected an object");
    reject_unknown(t, "tolerances", {"fairness_rel", "fairness_abs", "power_rel", "tracking_rel", "tail_window"});
    auto& tol = sc.tolerances;
    tol.fairness_rel = number_or(t, "fairness_rel", tol.fairness_rel, "tolerances");
    tol.fairness_abs = number_or(t, "fairness_abs", tol.fairness_abs, "tolerances");
    tol.power_rel = number_or(t, "power_rel", tol.power_rel, "tolerances");
    tol.tracking_rel = number_or(t, "tracking_rel", tol.tracking_rel, "tolerances");
    tol.tail_window = number_or(t, "tail_window", tol.tail_window, "tolerances");
  }
  if (j.contains("fault_injection")) {
    const auto& fi = j.at("fault_injection");
    if (!fi.is_object()) field_error("fault_injection", "expected an object");
    reject_unknown(fi, "fault_injection", {"follower_gain_scale"});
    if (fi.contains("follower_gain_scale")) {
      const auto& g = fi.at("follower_gain_scale");
      const std::string where = "fault_injection.follower_gain_scale";
      if (!g.is_object()) field_error(where, "expected an object");
      reject_unknown(g, where, {"agent", "scale"});
      sc.fault = GainFault{as_int(require(g, "agent", where), where + ".agent"),
                           as_number(require(g, "scale", where), where + ".scale")};
    }
  }
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (!o.is_object()) field_error("outputs", "expected an object");
    reject_unknown(o, "outputs", {"trajectory", "report", "report_text", "manifest"});
    f.outputs.trajectory = string_or(o, "trajectory", f.outputs.trajectory, "outputs");
    f.outputs.report = string_or(o, "report", f.outputs.report, "outputs");
    f.outputs.report_text = string_or(o, "report_text", f.outputs.report_text, "outputs");
    f.outputs.manifest = string_or(o, "manifest", f.outputs.manifest, "outputs");
  }
  sc.validate();
  return f;
}

ScenarioFile load_scenario(const fs::path& path) { return parse_scenario(read_file(path)); }

SweepFile parse_sweep(const std::string& text) {
  const json j = parse_text(text);
  if (!j.is_object()) throw ConfigError("line 1: top level must be a JSON object");
  reject_unknown(j, "", {"n_list", "eps_grid", "t_end", "tolerance", "dt_fraction", "outputs", "description"});
  SweepFile f;
  auto& s = f.sweep;
  if (j.contains("n_list")) {
    const auto& nl = j.at("n_list");
    if (!nl.is_array()) field_error("n_list", "expected an array of integers");
    s.n_list.clear();
    for (std::size_t i = 0; i < nl.size(); ++i) s.n_list.push_back(as_int(nl[i], "n_list[" + std::to_string(i) + "]"));
  }
  if (j.contains("eps_grid")) {
    const auto& g = j.at("eps_grid");
    if (!g.is_array()) field_error("eps_grid", "expected an array of numbers");
    for (std::size_t i = 0; i < g.size(); ++i) s.eps_grid.push_back(as_number(g[i], "eps_grid[" + std::to_string(i) + "]"));
  } else {
    s.eps_grid = SweepConfig::default_grid();
  }
  s.t_end = number_or(j, "t_end", s.t_end, "");
  s.tolerance = number_or(j, "tolerance", s.tolerance, "");
  s.dt_fraction = number_or(j, "dt_fraction", s.dt_fraction, "");
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    if (!o.is_object()) field_error("outputs", "expected an object");
    reject_unknown(o, "outputs", {"points", "brackets", "manifest"});
    f.outputs.points = string_or(o, "points", f.outputs.points, "outputs");
    f.outputs.brackets = string_or(o, "brackets", f.outputs.brackets, "outputs");
    f.outputs.manifest = string_or(o, "manifest", f.outputs.manifest, "outputs");
  }
  s.validate();
  return f;
}

SweepFile load_sweep(const fs::path& path) { return parse_sweep(read_file(path)); }

}  // namespace lfcons
