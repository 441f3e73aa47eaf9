#pragma once

// Leader-follower consensus protocol with a sum constraint.
//
// Agents 1..n sit on a chain. Agent 1 is the leader and carries an auxiliary
// integrator xi_h that drives the sum of the consensus states toward z*:
//
//   dxi_h/dt = z* - sum_i z_i
//   dz_1/dt  = -k (z_1 - xi_h)
//   dz_i/dt  = -k (z_i - z_{i-1}),   i = 2..n
//
// Indices in this API are zero-based: z(0) is the leader.

#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lfcons {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised for inputs that violate a documented precondition (sizes, signs).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical analysis step cannot produce a valid result.
class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Agent count, uniform gain and sum target. The time-scale parameter
/// epsilon is always derived from the gain, never stored separately.
class ProtocolConfig {
 public:
  static ProtocolConfig from_gain(int n, double k_alpha, double z_star);
  static ProtocolConfig from_epsilon(int n, double epsilon, double z_star);

  int n() const { return n_; }
  double k_alpha() const { return k_alpha_; }
  double epsilon() const { return 1.0 / k_alpha_; }
  double z_star() const { return z_star_; }

  ProtocolConfig with_z_star(double z_star) const;

 private:
  ProtocolConfig(int n, double k_alpha, double z_star);

  int n_;
  double k_alpha_;
  double z_star_;
};

struct SystemState {
  double xi_h = 0.0;
  Vector z;
};

struct StateDerivative {
  double dxi_h = 0.0;
  Vector dz;
};

/// psi_h = xi_h - xi_h0, y_i = z_i - xi_h.
struct ShiftedState {
  double psi_h = 0.0;
  Vector y;
};

struct ShiftedDerivative {
  double dpsi_h = 0.0;
  Vector dy;
};

/// What each agent receives over its communication links. Without delays
/// these are read straight off the current state; a delayed simulation fills
/// them from buffered history.
struct LinkSignals {
  /// Sum of follower states z_2..z_n as seen by the leader.
  double follower_sum = 0.0;
  /// upstream(i) is the value of z_{i-1} seen by agent i; entry 0 is unused.
  Vector upstream;

  static LinkSignals from_state(const SystemState& state);
};

StateDerivative p1_derivative(const SystemState& state, const ProtocolConfig& cfg);
StateDerivative p1_derivative(const SystemState& state, const ProtocolConfig& cfg,
                              const LinkSignals& links);

/// xi_h0 = z*/n and z_i0 = xi_h0.
SystemState equilibrium(const ProtocolConfig& cfg);

ShiftedState to_shifted(const SystemState& state, const ProtocolConfig& cfg);
SystemState from_shifted(const ShiftedState& shifted, const ProtocolConfig& cfg);

/// Right-hand side in shifted coordinates evaluated from its closed form:
///   dpsi/dt = -n psi - sum y
///   eps dy_1/dt = -y_1 - eps dpsi/dt
///   eps dy_i/dt = -(y_i - y_{i-1}) - eps dpsi/dt
ShiftedDerivative shifted_derivative(const ShiftedState& shifted, const ProtocolConfig& cfg);

/// z* that turns the wind-farm protocol into the plain sum-constrained one:
/// z* = P_d - sum_i (P_e,i + P_r,i).
double p2_reference(double p_d, std::span<const double> pe, std::span<const double> pr);

/// Flat layout used by the integrators: [xi_h, z_1, ..., z_n].
Vector pack(const SystemState& state);
SystemState unpack(const Eigen::Ref<const Vector>& flat, int n);

void require_finite(const SystemState& state);

}  // namespace lfcons
