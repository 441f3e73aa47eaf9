#include "lfcons/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

namespace lfcons {

namespace {

std::string describe_time(double t) {
  std::ostringstream os;
  os.precision(17);
  os << t;
  return os.str();
}

void check_state(double t, const Vector& x) {
  if (!x.allFinite()) {
    throw DivergenceError(t, "state became non-finite at t = " + describe_time(t));
  }
  if (x.norm() > kDivergenceNorm) {
    throw DivergenceError(t, "state norm exceeded 1e9 at t = " + describe_time(t));
  }
}

struct EventCursor {
  std::vector<std::pair<std::int64_t, double>> indexed;
  std::size_t next = 0;

  EventCursor(const EventSchedule& events, const SimConfig& sim) {
    for (const auto& e : events.events()) indexed.emplace_back(sim.steps_for(e.time), e.value);
  }

  void apply(std::int64_t step, double& param) {
    while (next < indexed.size() && indexed[next].first <= step) param = indexed[next++].second;
  }
};

void record(Trajectory& traj, std::int64_t step, const Vector& x, const SimConfig& sim) {
  traj.times.push_back(static_cast<double>(step) * sim.dt);
  traj.states.push_back(x);
}

}  // namespace

DivergenceError::DivergenceError(double time, const std::string& what)
    : std::runtime_error(what), time_(time) {}

std::int64_t SimConfig::steps_for(double duration) const {
  const double ratio = duration / dt;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, std::abs(ratio))) {
    throw ConfigError("duration " + describe_time(duration) +
                      " s is not an integer multiple of dt = " + describe_time(dt));
  }
  return static_cast<std::int64_t>(rounded);
}

std::int64_t SimConfig::steps() const { return steps_for(t_end); }

void SimConfig::validate(std::optional<double> fast_time_constant) const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be > 0");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw ConfigError("t_end must be > 0");
  if (!(delay_r >= 0.0) || !std::isfinite(delay_r)) throw ConfigError("delay_r must be >= 0");
  if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
  (void)steps();
  (void)delay_steps();
  if (fast_time_constant && dt > *fast_time_constant / 10.0 * (1.0 + 1e-12)) {
    throw ConfigError("dt = " + describe_time(dt) + " violates the stiffness guard dt <= " +
                      describe_time(*fast_time_constant / 10.0));
  }
}

EventSchedule::EventSchedule(std::vector<Event> events) : events_(std::move(events)) {
  for (std::size_t i = 0; i < events_.size(); ++i) {
    if (!(events_[i].time >= 0.0) || !std::isfinite(events_[i].value)) {
      throw ConfigError("event times must be >= 0 and values finite");
    }
    if (i > 0 && !(events_[i].time > events_[i - 1].time)) {
      throw ConfigError("event times must be strictly increasing");
    }
  }
}

double EventSchedule::value_at(double t, double initial) const {
  double v = initial;
  for (const auto& e : events_) {
    if (e.time <= t) v = e.value;
  }
  return v;
}

DelayBuffer::DelayBuffer(std::int64_t max_lag_steps, Vector history)
    : ring_(static_cast<std::size_t>(std::max<std::int64_t>(max_lag_steps, 0) + 1)),
      stamps_(ring_.size(), -1),
      history_(std::move(history)) {}

void DelayBuffer::push(std::int64_t step, const Vector& x) {
  if (step != newest_ + 1) throw std::logic_error("DelayBuffer: samples must be pushed in order");
  const auto slot = static_cast<std::size_t>(step % capacity());
  ring_[slot] = x;
  stamps_[slot] = step;
  newest_ = step;
}

const Vector& DelayBuffer::at(std::int64_t step) const {
  if (step < 0) return history_;
  const auto slot = static_cast<std::size_t>(step % capacity());
  if (step > newest_ || stamps_[slot] != step) {
    throw std::out_of_range("DelayBuffer: sample " + std::to_string(step) + " not available");
  }
  return ring_[slot];
}

Trajectory integrate(const VectorField& rhs, const Vector& x0, const SimConfig& sim,
                     const EventSchedule& events, double initial_param) {
  sim.validate();
  const auto n_steps = sim.steps();
  const double dt = sim.dt;
  EventCursor cursor(events, sim);

  Trajectory traj;
  traj.config = sim;
  Vector x = x0;
  check_state(0.0, x);
  record(traj, 0, x, sim);

  const auto dim = x.size();
  Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  double param = initial_param;
  for (std::int64_t k = 0; k < n_steps; ++k) {
    cursor.apply(k, param);
    const double t = static_cast<double>(k) * dt;
    rhs(t, x, param, k1);
    if (k1.size() != dim) throw ConfigError("vector field returned wrong dimension");
    tmp = x + 0.5 * dt * k1;
    rhs(t + 0.5 * dt, tmp, param, k2);
    tmp = x + 0.5 * dt * k2;
    rhs(t + 0.5 * dt, tmp, param, k3);
    tmp = x + dt * k3;
    rhs(t + dt, tmp, param, k4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(static_cast<double>(k + 1) * dt, x);
    if ((k + 1) % sim.record_stride == 0) record(traj, k + 1, x, sim);
  }
  return traj;
}

Trajectory integrate_delayed(const DelayedVectorField& rhs, const Vector& x0,
                             std::int64_t max_lag_steps, const SimConfig& sim,
                             const EventSchedule& events, double initial_param) {
  sim.validate();
  const auto n_steps = sim.steps();
  const double dt = sim.dt;
  EventCursor cursor(events, sim);

  DelayBuffer buffer(max_lag_steps, x0);
  Trajectory traj;
  traj.config = sim;
  Vector x = x0;
  check_state(0.0, x);
  record(traj, 0, x, sim);
  buffer.push(0, x);

  const auto dim = x.size();
  Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  double param = initial_param;
  for (std::int64_t k = 0; k < n_steps; ++k) {
    cursor.apply(k, param);
    const double t = static_cast<double>(k) * dt;
    const DelayView view{k, &buffer};
    rhs(t, x, view, param, k1);
    if (k1.size() != dim) throw ConfigError("vector field returned wrong dimension");
    tmp = x + 0.5 * dt * k1;
    rhs(t + 0.5 * dt, tmp, view, param, k2);
    tmp = x + 0.5 * dt * k2;
    rhs(t + 0.5 * dt, tmp, view, param, k3);
    tmp = x + dt * k3;
    rhs(t + dt, tmp, view, param, k4);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(static_cast<double>(k + 1) * dt, x);
    buffer.push(k + 1, x);
    if ((k + 1) % sim.record_stride == 0) record(traj, k + 1, x, sim);
  }
  return traj;
}

Trajectory integrate_delayed(const Matrix& a0, const Matrix& a1, const Vector& history,
                             const SimConfig& sim) {
  const auto n = history.size();
  if (a0.rows() != n || a0.cols() != n || a1.rows() != n || a1.cols() != n) {
    throw ConfigError("delay matrices and history must agree in dimension");
  }
  sim.validate();
  const auto lag = sim.delay_steps();
  auto rhs = [&a0, &a1, lag](double, const Vector& y, const DelayView& view, double, Vector& dy) {
    if (lag == 0) {
      dy.noalias() = a0 * y;
      dy.noalias() += a1 * y;
    } else {
      dy.noalias() = a0 * y;
      dy.noalias() += a1 * view.lagged(lag);
    }
  };
  return integrate_delayed(rhs, history, lag, sim);
}

Vector analytic_linear_solution(const Matrix& a, const Vector& b, const Vector& x0, double t) {
  const auto n = a.rows();
  if (a.cols() != n || b.size() != n || x0.size() != n) {
    throw ConfigError("analytic_linear_solution: dimension mismatch");
  }
  if (!(t >= 0.0)) throw ConfigError("analytic_linear_solution: t must be >= 0");
  Matrix aug = Matrix::Zero(n + 1, n + 1);
  aug.topLeftCorner(n, n) = a * t;
  aug.topRightCorner(n, 1) = b * t;
  const Matrix e = aug.exp();
  return e.topLeftCorner(n, n) * x0 + e.topRightCorner(n, 1);
}

VectorField p1_field(const ProtocolConfig& cfg) {
  return [cfg](double, const Vector& x, double z_star, Vector& dx) {
    const int n = cfg.n();
    const auto d = p1_derivative(unpack(x, n), cfg.with_z_star(z_star));
    dx.resize(n + 1);
    dx(0) = d.dxi_h;
    dx.tail(n) = d.dz;
  };
}

std::pair<Matrix, Vector> p1_linear_system(const ProtocolConfig& cfg) {
  const int n = cfg.n();
  const double k = cfg.k_alpha();
  Matrix a = Matrix::Zero(n + 1, n + 1);
  Vector b = Vector::Zero(n + 1);
  a.block(0, 1, 1, n).setConstant(-1.0);
  b(0) = cfg.z_star();
  a(1, 0) = k;
  a(1, 1) = -k;
  for (int i = 1; i < n; ++i) {
    a(i + 1, i + 1) = -k;
    a(i + 1, i) = k;
  }
  return {a, b};
}

std::string to_string(SweepOutcome outcome) {
  switch (outcome) {
    case SweepOutcome::converged: return "converged";
    case SweepOutcome::diverged: return "diverged";
    case SweepOutcome::slow: return "slow";
  }
  return "unknown";
}

std::vector<double> SweepConfig::default_grid() {
  return {1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0};
}

void SweepConfig::validate() const {
  if (n_list.empty()) throw ConfigError("sweep n_list is empty");
  for (int n : n_list) {
    if (n < 2) throw ConfigError("sweep n_list entries must be >= 2");
  }
  if (eps_grid.empty()) throw ConfigError("sweep eps_grid is empty");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw ConfigError("eps_grid entries must be > 0");
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1])) {
      throw ConfigError("eps_grid must be strictly ascending");
    }
  }
  if (!(t_end > 0.0)) throw ConfigError("sweep t_end must be > 0");
  if (!(tolerance > 0.0)) throw ConfigError("sweep tolerance must be > 0");
  if (!(dt_fraction > 0.0 && dt_fraction <= 0.1)) {
    throw ConfigError("sweep dt_fraction must lie in (0, 0.1]");
  }
}

namespace {

SweepPoint run_sweep_point(int n, double eps, const SweepConfig& cfg) {
  SweepPoint pt;
  pt.n = n;
  pt.epsilon = eps;
  pt.settling_time = std::numeric_limits<double>::quiet_NaN();

  const auto proto = ProtocolConfig::from_epsilon(n, eps, static_cast<double>(n));
  const Vector target = pack(equilibrium(proto));
  const Vector x0 = Vector::Zero(n + 1);
  const double initial_distance = (x0 - target).lpNorm<Eigen::Infinity>();

  // dt is a fraction of the fastest time scale, snapped so t_end is a whole
  // number of steps.
  const double dt_raw = std::min(eps, 1.0 / n) * cfg.dt_fraction;
  const auto n_steps = static_cast<std::int64_t>(std::ceil(cfg.t_end / dt_raw));
  SimConfig sim;
  sim.dt = cfg.t_end / static_cast<double>(n_steps);
  sim.t_end = cfg.t_end;
  sim.record_stride = static_cast<int>(std::max<std::int64_t>(1, n_steps / 20000));

  try {
    const auto traj = integrate(p1_field(proto), x0, sim, {}, proto.z_star());
    pt.final_distance = (traj.states.back() - target).lpNorm<Eigen::Infinity>();
    if (pt.final_distance <= cfg.tolerance) {
      pt.outcome = SweepOutcome::converged;
      pt.settling_time = 0.0;
      for (std::size_t i = traj.size(); i-- > 0;) {
        if ((traj.states[i] - target).lpNorm<Eigen::Infinity>() > cfg.tolerance) {
          pt.settling_time = traj.times[std::min(i + 1, traj.size() - 1)];
          break;
        }
      }
    } else if (pt.final_distance > initial_distance) {
      pt.outcome = SweepOutcome::diverged;
    } else {
      pt.outcome = SweepOutcome::slow;
    }
  } catch (const DivergenceError&) {
    pt.outcome = SweepOutcome::diverged;
    pt.final_distance = std::numeric_limits<double>::infinity();
  }
  return pt;
}

}  // namespace

SweepReport epsilon_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepReport report;
  for (int n : cfg.n_list) {
    for (double eps : cfg.eps_grid) report.points.push_back(SweepPoint{n, eps});
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.points.size(); i = next++) {
      report.points[i] = run_sweep_point(report.points[i].n, report.points[i].epsilon, cfg);
    }
  };
  const auto n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1,
                                                 report.points.size());
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < n_threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  const auto per_n = cfg.eps_grid.size();
  for (std::size_t g = 0; g < cfg.n_list.size(); ++g) {
    SweepBracket br;
    br.n = cfg.n_list[g];
    const auto first = report.points.begin() + static_cast<std::ptrdiff_t>(g * per_n);
    std::optional<std::size_t> last_ok;
    for (std::size_t i = 0; i < per_n; ++i) {
      if (first[static_cast<std::ptrdiff_t>(i)].outcome == SweepOutcome::converged) last_ok = i;
    }
    if (last_ok) {
      br.lower = cfg.eps_grid[*last_ok];
      if (*last_ok + 1 < per_n) br.upper = cfg.eps_grid[*last_ok + 1];
      br.bracketed = br.upper.has_value();
      br.monotone = true;
      for (std::size_t i = 0; i <= *last_ok; ++i) {
        if (first[static_cast<std::ptrdiff_t>(i)].outcome != SweepOutcome::converged) {
          br.monotone = false;
        }
      }
    }
    if (br.lower && !br.upper) br.upper = br.lower;  // degenerate, flagged unbracketed
    report.brackets.push_back(br);
  }
  return report;
}

}  // namespace lfcons
