#pragma once

// Protocol P2 over a chain of wind generators with integrated storage.
//
// State layout: [xi_h, z_1..z_n, x_1..x_n] where z_i is the consensus target
// for the storage power and x_i the storage power actually delivered
// (x > 0 discharges into the farm output, x < 0 charges).

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "lfcons/simulation.hpp"

namespace lfcons {

enum class WindProfileKind { constant, step, sinusoid, seeded_noise };

WindProfileKind parse_wind_profile_kind(const std::string& name);
std::string to_string(WindProfileKind kind);

/// Per-WG stator (pe) and rotor-side (pr) power in MW.
struct WindProfile {
  WindProfileKind kind = WindProfileKind::constant;
  Vector pe_mean;  ///< length n
  Vector pr_mean;  ///< length n
  /// step: pe jumps by step_delta at step_time.
  double step_time = 0.0;
  double step_delta = 0.0;
  /// sinusoid: pe = mean + amplitude sin(2 pi t / period + phase_i), phase_i = 2 pi i / n.
  double amplitude = 0.0;
  double period = 1.0;
  /// seeded-noise: piecewise-constant pe offsets drawn uniformly from
  /// [-amplitude, amplitude], redrawn every hold_time seconds.
  double hold_time = 0.1;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(pe_mean.size()); }
  void validate() const;
};

struct WindSample {
  Vector pe;
  Vector pr;
};

WindSample wind_profile(const WindProfile& profile, double t);

/// dx_i/dt = (z_i - x_i) / t_storage.
double storage_dynamics(double x, double z, double t_storage);

struct LinkDelays {
  double neighbor = 0.0;   ///< z_{i-1} -> agent i
  double aggregate = 0.0;  ///< follower terms of the leader's sum
};

struct FairnessTolerances {
  double fairness_rel = 0.01;  ///< spread <= fairness_rel * mean |x|
  double fairness_abs = 1e-6;  ///< floor when mean |x| is near zero (MW)
  double power_rel = 0.01;     ///< mismatch <= power_rel * |P_d|
  double tracking_rel = 0.02;  ///< max |x_i - z_i| <= tracking_rel * |z_i|
  double tail_window = 0.2;    ///< seconds before t_end used for the report
};

/// Test fixture: multiplies one follower's dz by `scale`, equivalent to a
/// mis-set gain on that agent.
struct GainFault {
  int agent = 0;  ///< 1-based, must be a follower (>= 2)
  double scale = 1.0;
};

struct WindFarmScenario {
  int n = 10;
  double k_alpha = 100.0;
  double t_storage = 1e-3;
  SimConfig sim{1e-4, 6.0, 0.0, 10};
  LinkDelays delays;
  double initial_pd = 0.0;
  EventSchedule pd_schedule;
  WindProfile wind;
  FairnessTolerances tolerances;
  std::optional<GainFault> fault;

  double epsilon() const { return 1.0 / k_alpha; }
  double pd_at(double t) const { return pd_schedule.value_at(t, initial_pd); }
  bool delayed() const { return delays.neighbor > 0.0 || delays.aggregate > 0.0; }
  void validate() const;
};

/// Protocol P2 derivative (no storage) for a state [xi_h, z]. Delegates to
/// p1_derivative with z* = p2_reference(P_d, pe, pr).
StateDerivative p2_derivative(const SystemState& state, int n, double k_alpha, double p_d,
                              const WindSample& wind);

/// Full derivative of [xi_h, z, x] at time t without delays.
Vector windfarm_derivative(const WindFarmScenario& scenario, double t, const Vector& state);

/// sum_i (pe_i + pr_i + x_i) using the storage state x, not the target z.
double total_output(const WindFarmScenario& scenario, double t, const Vector& state);

/// Initial state: xi_h = z = x = 0.
Vector initial_state(const WindFarmScenario& scenario);

/// Integrates the scenario (with delays when configured).
Trajectory simulate(const WindFarmScenario& scenario);

struct FairnessReport {
  double window_start = 0.0;
  double window_end = 0.0;
  double p_d = 0.0;
  double z_star = 0.0;
  // Final state of the window.
  double spread = 0.0;
  double sum_storage = 0.0;
  double mismatch = 0.0;
  double tracking_gap = 0.0;
  // Window averages.
  double mean_spread = 0.0;
  double mean_mismatch = 0.0;
  // Worst case over the window.
  double max_spread = 0.0;
  double max_mismatch = 0.0;
  double max_tracking_gap = 0.0;
  double mean_storage = 0.0;
  double fairness_tol = 0.0;
  double power_tol = 0.0;
  double tracking_tol = 0.0;
  bool fair = false;
  bool tracking_ok = false;
  double settling_time = 0.0;  ///< worst settling time over P_d events; NaN if never settled
};

/// Evaluates sharing and conservation over [window_start, window_end].
/// Throws ConfigError for a window that selects no samples.
FairnessReport fairness_report(const WindFarmScenario& scenario, const Trajectory& traj,
                               double window_start, double window_end);

/// Tail window from the scenario's tolerances.
FairnessReport fairness_report(const WindFarmScenario& scenario, const Trajectory& traj);

/// Time after each P_d event until |total - P_d| stays within power_rel |P_d|.
/// Returns the largest such time, or NaN if some event never settles.
double settling_time(const WindFarmScenario& scenario, const Trajectory& traj);

/// 10 WGs, two P_d steps; r = 0 for scenario 1, r = 5 ms for scenario 2.
WindFarmScenario default_scenario(double delay_r = 0.0);

}  // namespace lfcons
