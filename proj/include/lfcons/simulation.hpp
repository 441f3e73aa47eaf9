#pragma once

// Deterministic fixed-step integration (classical RK4), with optional fixed
// delays handled by the method of steps over an exact ring buffer.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lfcons/protocol.hpp"

namespace lfcons {

/// Raised when the state turns non-finite or its norm exceeds kDivergenceNorm.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double time, const std::string& what);
  double time() const { return time_; }

 private:
  double time_;
};

inline constexpr double kDivergenceNorm = 1e9;

struct SimConfig {
  double dt = 1e-4;
  double t_end = 1.0;
  double delay_r = 0.0;
  int record_stride = 1;

  /// Checks positivity, that t_end and delay_r are integer multiples of dt,
  /// and, when a fast time constant is given, that dt <= fast / 10.
  void validate(std::optional<double> fast_time_constant = std::nullopt) const;
  std::int64_t steps() const;
  std::int64_t delay_steps() const { return steps_for(delay_r); }
  /// Converts a duration that must be a whole number of steps.
  std::int64_t steps_for(double duration) const;
};

struct Event {
  double time = 0.0;
  double value = 0.0;
};

/// Step changes of a scalar input (z* or P_d), sorted by time.
class EventSchedule {
 public:
  EventSchedule() = default;
  explicit EventSchedule(std::vector<Event> events);

  const std::vector<Event>& events() const { return events_; }
  bool empty() const { return events_.empty(); }
  /// Value in force at time t, or `initial` before the first event.
  double value_at(double t, double initial) const;

 private:
  std::vector<Event> events_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  SimConfig config;
  std::vector<std::string> columns;  ///< optional names, excluding "t"

  std::size_t size() const { return times.size(); }
};

/// dx = f(t, x, param). `param` is the value currently set by the event schedule.
using VectorField = std::function<void(double t, const Vector& x, double param, Vector& dx)>;

/// Stored samples of past steps. Sample k is the state at t = k dt; before
/// step 0 the constant pre-history applies.
class DelayBuffer {
 public:
  DelayBuffer(std::int64_t max_lag_steps, Vector history);

  void push(std::int64_t step, const Vector& x);
  /// Exact sample for `step`, or the history for step < 0. Throws
  /// std::out_of_range for steps already evicted or not yet pushed.
  const Vector& at(std::int64_t step) const;
  const Vector& history() const { return history_; }
  std::int64_t capacity() const { return static_cast<std::int64_t>(ring_.size()); }

 private:
  std::vector<Vector> ring_;
  std::vector<std::int64_t> stamps_;
  Vector history_;
  std::int64_t newest_ = -1;
};

/// Context handed to a delayed vector field for one RK4 step. Lagged values
/// are held at the step's base time across all internal stages.
struct DelayView {
  std::int64_t step;  ///< index of the base sample of the current step
  const DelayBuffer* buffer;

  const Vector& lagged(std::int64_t lag_steps) const { return buffer->at(step - lag_steps); }
};

/// dx = f(t, x, view, param). A field that uses lag 0 must read the stage
/// state `x` rather than the buffer, so that r = 0 reduces to plain RK4.
using DelayedVectorField =
    std::function<void(double t, const Vector& x, const DelayView& view, double param, Vector& dx)>;

Trajectory integrate(const VectorField& rhs, const Vector& x0, const SimConfig& sim,
                     const EventSchedule& events = {}, double initial_param = 0.0);

Trajectory integrate_delayed(const DelayedVectorField& rhs, const Vector& x0,
                             std::int64_t max_lag_steps, const SimConfig& sim,
                             const EventSchedule& events = {}, double initial_param = 0.0);

/// dy/dtau = A0 y(tau) + A1 y(tau - r) with constant pre-history y = history.
Trajectory integrate_delayed(const Matrix& a0, const Matrix& a1, const Vector& history,
                             const SimConfig& sim);

/// x(t) for dx/dt = A x + b, via the exponential of [[A, b], [0, 0]].
Vector analytic_linear_solution(const Matrix& a, const Vector& b, const Vector& x0, double t);

/// Protocol P1 as a flat vector field over [xi_h, z]; the event parameter is z*.
VectorField p1_field(const ProtocolConfig& cfg);

/// (A, b) such that d/dt [xi_h, z] = A [xi_h, z] + b for protocol P1.
std::pair<Matrix, Vector> p1_linear_system(const ProtocolConfig& cfg);

enum class SweepOutcome { converged, diverged, slow };
std::string to_string(SweepOutcome outcome);

struct SweepConfig {
  std::vector<int> n_list{10};
  std::vector<double> eps_grid;
  double t_end = 30.0;
  double tolerance = 1e-4;
  /// dt = min(eps, 1/n) * dt_fraction, with dt_fraction <= 0.1.
  double dt_fraction = 0.05;

  static std::vector<double> default_grid();
  void validate() const;
};

struct SweepPoint {
  int n = 0;
  double epsilon = 0.0;
  SweepOutcome outcome = SweepOutcome::slow;
  double settling_time = 0.0;  ///< NaN unless converged
  double final_distance = 0.0;
};

/// Empirical stability boundary for one agent count. Never a certified bound.
struct SweepBracket {
  int n = 0;
  std::optional<double> lower;  ///< largest converged epsilon
  std::optional<double> upper;  ///< next grid point above `lower`
  bool bracketed = false;       ///< both ends present and distinct
  bool monotone = false;        ///< every grid point <= lower converged, none above did
};

struct SweepReport {
  std::vector<SweepPoint> points;  ///< grouped by n, in grid order
  std::vector<SweepBracket> brackets;
};

/// Runs protocol P1 from xi_h = 0, z = 0 with z* = n for every (n, eps) and
/// classifies by ||x(t_end) - x_eq||_inf <= tolerance. Points run in parallel;
/// results keep grid order.
SweepReport epsilon_sweep(const SweepConfig& cfg);

}  // namespace lfcons
