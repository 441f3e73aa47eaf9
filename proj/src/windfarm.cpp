#include "lfcons/windfarm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace lfcons {

namespace {

constexpr double kTimeSlack = 1e-12;

struct Lags {
  std::int64_t neighbor = 0;
  std::int64_t aggregate = 0;
};

double wind_sum(const WindSample& w, int from) {
  double s = 0.0;
  for (int i = from; i < w.pe.size(); ++i) s += w.pe(i) + w.pr(i);
  return s;
}

// Shared by the delayed and undelayed paths. `links` and `z_star` carry
// whatever each agent actually receives.
void assemble(const WindFarmScenario& sc, const Vector& x, double z_star, const LinkSignals& links,
              Vector& dx) {
  const int n = sc.n;
  const SystemState state{x(0), x.segment(1, n)};
  const auto cfg = ProtocolConfig::from_gain(n, sc.k_alpha, z_star);
  const auto d = p1_derivative(state, cfg, links);
  dx.resize(2 * n + 1);
  dx(0) = d.dxi_h;
  dx.segment(1, n) = d.dz;
  if (sc.fault) dx(sc.fault->agent) *= sc.fault->scale;
  for (int i = 0; i < n; ++i) dx(1 + n + i) = storage_dynamics(x(1 + n + i), x(1 + i), sc.t_storage);
}

}  // namespace

WindProfileKind parse_wind_profile_kind(const std::string& name) {
  if (name == "constant") return WindProfileKind::constant;
  if (name == "step") return WindProfileKind::step;
  if (name == "sinusoid") return WindProfileKind::sinusoid;
  if (name == "seeded-noise" || name == "seeded_noise") return WindProfileKind::seeded_noise;
  throw ConfigError("unknown wind profile kind '" + name + "'");
}

std::string to_string(WindProfileKind kind) {
  switch (kind) {
    case WindProfileKind::constant: return "constant";
    case WindProfileKind::step: return "step";
    case WindProfileKind::sinusoid: return "sinusoid";
    case WindProfileKind::seeded_noise: return "seeded-noise";
  }
  return "unknown";
}

void WindProfile::validate() const {
  if (pe_mean.size() < 1 || pe_mean.size() != pr_mean.size()) {
    throw ConfigError("wind profile: pe and pr must be non-empty and of equal length");
  }
  if (!pe_mean.allFinite() || !pr_mean.allFinite()) throw ConfigError("wind profile: non-finite mean");
  if (!std::isfinite(amplitude) || amplitude < 0.0) {
    throw ConfigError("wind profile: amplitude must be >= 0");
  }
  if (kind == WindProfileKind::sinusoid && !(period > 0.0)) {
    throw ConfigError("wind profile: sinusoid period must be > 0");
  }
  if (kind == WindProfileKind::seeded_noise && !(hold_time > 0.0)) {
    throw ConfigError("wind profile: hold_time must be > 0");
  }
}

WindSample wind_profile(const WindProfile& profile, double t) {
  WindSample w{profile.pe_mean, profile.pr_mean};
  const int n = profile.n();
  switch (profile.kind) {
    case WindProfileKind::constant:
      break;
    case WindProfileKind::step:
      if (t >= profile.step_time) w.pe.array() += profile.step_delta;
      break;
    case WindProfileKind::sinusoid:
      for (int i = 0; i < n; ++i) {
        const double phase = 2.0 * std::numbers::pi * i / n;
        w.pe(i) += profile.amplitude * std::sin(2.0 * std::numbers::pi * t / profile.period + phase);
      }
      break;
    case WindProfileKind::seeded_noise: {
      const auto slot = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / profile.hold_time)));
      for (int i = 0; i < n; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(profile.seed),
                          static_cast<std::uint32_t>(profile.seed >> 32),
                          static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(slot),
                          static_cast<std::uint32_t>(slot >> 32)};
        std::mt19937_64 rng(seq);
        // Map the raw 53 high bits to [-1, 1] directly so the draw does not
        // depend on the standard library's distribution implementation.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        w.pe(i) += profile.amplitude * (2.0 * u - 1.0);
      }
      break;
    }
  }
  return w;
}

double storage_dynamics(double x, double z, double t_storage) {
  if (!(t_storage > 0.0)) throw ConfigError("t_storage must be > 0");
  return (z - x) / t_storage;
}

void WindFarmScenario::validate() const {
  if (n < 2) throw ConfigError("scenario needs n >= 2");
  if (!(k_alpha > 0.0)) throw ConfigError("k_alpha must be > 0");
  if (!(t_storage > 0.0)) throw ConfigError("t_storage must be > 0");
  if (t_storage > epsilon() / 10.0 * (1.0 + 1e-12)) {
    throw ConfigError("t_storage must be <= epsilon / 10 = " + std::to_string(epsilon() / 10.0));
  }
  sim.validate(std::min(epsilon(), t_storage));
  if (delays.neighbor < 0.0 || delays.aggregate < 0.0) throw ConfigError("delays must be >= 0");
  (void)sim.steps_for(delays.neighbor);
  (void)sim.steps_for(delays.aggregate);
  wind.validate();
  if (wind.n() != n) throw ConfigError("wind profile length does not match n");
  if (fault && (fault->agent < 2 || fault->agent > n)) {
    throw ConfigError("fault injection agent must be a follower index in [2, n]");
  }
  for (const auto& e : pd_schedule.events()) (void)sim.steps_for(e.time);
  if (!(tolerances.fairness_rel > 0 && tolerances.power_rel > 0 && tolerances.tracking_rel > 0 &&
        tolerances.fairness_abs >= 0 && tolerances.tail_window > 0)) {
    throw ConfigError("tolerances must be positive");
  }
  if (tolerances.tail_window > sim.t_end) throw ConfigError("tail_window longer than t_end");
}

StateDerivative p2_derivative(const SystemState& state, int n, double k_alpha, double p_d,
                              const WindSample& wind) {
  const double z_star = p2_reference(p_d, std::span<const double>(wind.pe.data(), wind.pe.size()),
                                     std::span<const double>(wind.pr.data(), wind.pr.size()));
  return p1_derivative(state, ProtocolConfig::from_gain(n, k_alpha, z_star));
}

Vector windfarm_derivative(const WindFarmScenario& scenario, double t, const Vector& state) {
  const int n = scenario.n;
  if (state.size() != 2 * n + 1) throw ConfigError("wind farm state must have 2n + 1 entries");
  const auto wind = wind_profile(scenario.wind, t);
  const double z_star = scenario.pd_at(t) - wind_sum(wind, 0);
  Vector dx;
  assemble(scenario, state, z_star, LinkSignals::from_state({state(0), state.segment(1, n)}), dx);
  return dx;
}

double total_output(const WindFarmScenario& scenario, double t, const Vector& state) {
  const int n = scenario.n;
  if (state.size() != 2 * n + 1) throw ConfigError("wind farm state must have 2n + 1 entries");
  return wind_sum(wind_profile(scenario.wind, t), 0) + state.tail(n).sum();
}

Vector initial_state(const WindFarmScenario& scenario) { return Vector::Zero(2 * scenario.n + 1); }

Trajectory simulate(const WindFarmScenario& scenario) {
  scenario.validate();
  const int n = scenario.n;
  Trajectory traj;

  if (!scenario.delayed()) {
    VectorField rhs = [&scenario, n](double t, const Vector& x, double p_d, Vector& dx) {
      const auto wind = wind_profile(scenario.wind, t);
      assemble(scenario, x, p_d - wind_sum(wind, 0),
               LinkSignals::from_state({x(0), x.segment(1, n)}), dx);
    };
    traj = integrate(rhs, initial_state(scenario), scenario.sim, scenario.pd_schedule,
                     scenario.initial_pd);
  } else {
    const Lags lags{scenario.sim.steps_for(scenario.delays.neighbor),
                    scenario.sim.steps_for(scenario.delays.aggregate)};
    const double dt = scenario.sim.dt;
    DelayedVectorField rhs = [&scenario, n, lags, dt](double t, const Vector& x,
                                                      const DelayView& view, double p_d,
                                                      Vector& dx) {
      const Vector z = x.segment(1, n);
      LinkSignals links;
      links.upstream = Vector::Zero(n);
      if (lags.neighbor == 0) {
        links.upstream.tail(n - 1) = z.head(n - 1);
      } else {
        links.upstream.tail(n - 1) = view.lagged(lags.neighbor).segment(1, n - 1);
      }
      const auto wind_now = wind_profile(scenario.wind, t);
      double follower_wind = 0.0;
      if (lags.aggregate == 0) {
        links.follower_sum = z.tail(n - 1).sum();
        follower_wind = wind_sum(wind_now, 1);
      } else {
        links.follower_sum = view.lagged(lags.aggregate).segment(2, n - 1).sum();
        const double t_seen =
            std::max(0.0, static_cast<double>(view.step - lags.aggregate) * dt);
        follower_wind = wind_sum(wind_profile(scenario.wind, t_seen), 1);
      }
      const double leader_wind = wind_now.pe(0) + wind_now.pr(0);
      assemble(scenario, x, p_d - leader_wind - follower_wind, links, dx);
    };
    traj = integrate_delayed(rhs, initial_state(scenario), std::max(lags.neighbor, lags.aggregate),
                             scenario.sim, scenario.pd_schedule, scenario.initial_pd);
  }

  traj.columns.push_back("xi_h");
  for (int i = 1; i <= n; ++i) traj.columns.push_back("z_" + std::to_string(i));
  for (int i = 1; i <= n; ++i) traj.columns.push_back("x_" + std::to_string(i));
  return traj;
}

FairnessReport fairness_report(const WindFarmScenario& scenario, const Trajectory& traj,
                               double window_start, double window_end) {
  const int n = scenario.n;
  const auto& tol = scenario.tolerances;
  FairnessReport r;
  r.window_start = window_start;
  r.window_end = window_end;

  std::size_t count = 0;
  bool tracking_ok = true;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t = traj.times[k];
    if (t < window_start - kTimeSlack || t > window_end + kTimeSlack) continue;
    const Vector& s = traj.states[k];
    if (s.size() != 2 * n + 1) throw ConfigError("trajectory does not carry storage states");
    const auto x = s.tail(n);
    const auto z = s.segment(1, n);
    const double p_d = scenario.pd_at(t);
    const auto wind = wind_profile(scenario.wind, t);

    r.p_d = p_d;
    r.z_star = p_d - wind_sum(wind, 0);
    r.spread = x.maxCoeff() - x.minCoeff();
    r.sum_storage = x.sum();
    r.mismatch = std::abs(p_d - (wind_sum(wind, 0) + r.sum_storage));
    r.tracking_gap = (x - z).cwiseAbs().maxCoeff();
    r.mean_storage = x.cwiseAbs().mean();
    for (int i = 0; i < n; ++i) {
      if (std::abs(x(i) - z(i)) > std::max(tol.tracking_rel * std::abs(z(i)), tol.fairness_abs)) {
        tracking_ok = false;
      }
    }
    r.mean_spread += r.spread;
    r.mean_mismatch += r.mismatch;
    r.max_spread = std::max(r.max_spread, r.spread);
    r.max_mismatch = std::max(r.max_mismatch, r.mismatch);
    r.max_tracking_gap = std::max(r.max_tracking_gap, r.tracking_gap);
    ++count;
  }
  if (count == 0) throw ConfigError("fairness window contains no trajectory samples");
  r.mean_spread /= static_cast<double>(count);
  r.mean_mismatch /= static_cast<double>(count);

  r.fairness_tol = std::max(tol.fairness_rel * r.mean_storage, tol.fairness_abs);
  r.power_tol = tol.power_rel * std::abs(r.p_d);
  const Vector z_final = traj.states.back().segment(1, n);
  r.tracking_tol = std::max(tol.tracking_rel * z_final.cwiseAbs().minCoeff(), tol.fairness_abs);
  r.tracking_ok = tracking_ok;
  r.fair = r.max_spread <= r.fairness_tol && r.max_mismatch <= r.power_tol;
  r.settling_time = settling_time(scenario, traj);
  return r;
}

FairnessReport fairness_report(const WindFarmScenario& scenario, const Trajectory& traj) {
  const double end = scenario.sim.t_end;
  return fairness_report(scenario, traj, end - scenario.tolerances.tail_window, end);
}

double settling_time(const WindFarmScenario& scenario, const Trajectory& traj) {
  std::vector<double> starts{0.0};
  for (const auto& e : scenario.pd_schedule.events()) {
    if (e.time > kTimeSlack) starts.push_back(e.time);
  }
  const double end = traj.times.empty() ? 0.0 : traj.times.back();
  const double sample_dt = scenario.sim.dt * scenario.sim.record_stride;
  double worst = 0.0;
  for (std::size_t e = 0; e < starts.size(); ++e) {
    const double t0 = starts[e];
    const double t1 = e + 1 < starts.size() ? starts[e + 1] : end + sample_dt;
    double last_bad = -1.0;
    double last_seen = -1.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double t = traj.times[k];
      if (t < t0 - kTimeSlack || t >= t1 - kTimeSlack) continue;
      const double p_d = scenario.pd_at(t);
      const double mismatch = std::abs(total_output(scenario, t, traj.states[k]) - p_d);
      if (mismatch > scenario.tolerances.power_rel * std::abs(p_d)) last_bad = t;
      last_seen = t;
    }
    if (last_seen < 0.0) continue;
    if (last_bad >= 0.0 && last_bad >= last_seen) return std::numeric_limits<double>::quiet_NaN();
    if (last_bad >= 0.0) worst = std::max(worst, last_bad + sample_dt - t0);
  }
  return worst;
}

WindFarmScenario default_scenario(double delay_r) {
  WindFarmScenario sc;
  sc.n = 10;
  sc.k_alpha = 100.0;
  sc.t_storage = 1e-3;
  sc.sim = SimConfig{1e-4, 6.0, delay_r, 10};
  sc.delays = LinkDelays{delay_r, delay_r};
  sc.wind.kind = WindProfileKind::constant;
  sc.wind.pe_mean.resize(sc.n);
  for (int i = 0; i < sc.n; ++i) sc.wind.pe_mean(i) = 1.2 + 0.05 * i;
  sc.wind.pr_mean = Vector::Constant(sc.n, 0.3);
  sc.initial_pd = 20.0;
  sc.pd_schedule = EventSchedule({{0.0, 20.0}, {2.0, 22.0}, {4.0, 19.5}});
  return sc;
}

}  // namespace lfcons
