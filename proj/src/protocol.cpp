#include "lfcons/protocol.hpp"

#include <cmath>
#include <string>

namespace lfcons {

namespace {

void check_dims(const SystemState& state, const ProtocolConfig& cfg) {
  if (state.z.size() != cfg.n()) {
    throw ConfigError("state has " + std::to_string(state.z.size()) +
                      " consensus entries, config expects n = " + std::to_string(cfg.n()));
  }
}

}  // namespace

ProtocolConfig::ProtocolConfig(int n, double k_alpha, double z_star)
    : n_(n), k_alpha_(k_alpha), z_star_(z_star) {
  if (n < 2) {
    throw ConfigError("protocol needs a leader and at least one follower (n >= 2), got n = " +
                      std::to_string(n));
  }
  if (!(k_alpha > 0.0) || !std::isfinite(k_alpha)) {
    throw ConfigError("k_alpha must be finite and > 0");
  }
  if (!std::isfinite(z_star)) {
    throw ConfigError("z_star must be finite");
  }
}

ProtocolConfig ProtocolConfig::from_gain(int n, double k_alpha, double z_star) {
  return ProtocolConfig(n, k_alpha, z_star);
}

ProtocolConfig ProtocolConfig::from_epsilon(int n, double epsilon, double z_star) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw ConfigError("epsilon must be finite and > 0");
  }
  return ProtocolConfig(n, 1.0 / epsilon, z_star);
}

ProtocolConfig ProtocolConfig::with_z_star(double z_star) const {
  return ProtocolConfig(n_, k_alpha_, z_star);
}

LinkSignals LinkSignals::from_state(const SystemState& state) {
  const auto n = state.z.size();
  LinkSignals links;
  links.follower_sum = n > 1 ? state.z.tail(n - 1).sum() : 0.0;
  links.upstream = Vector::Zero(n);
  if (n > 1) links.upstream.tail(n - 1) = state.z.head(n - 1);
  return links;
}

StateDerivative p1_derivative(const SystemState& state, const ProtocolConfig& cfg) {
  check_dims(state, cfg);
  return p1_derivative(state, cfg, LinkSignals::from_state(state));
}

StateDerivative p1_derivative(const SystemState& state, const ProtocolConfig& cfg,
                              const LinkSignals& links) {
  check_dims(state, cfg);
  if (links.upstream.size() != cfg.n()) {
    throw ConfigError("link signal vector has wrong length");
  }
  const double k = cfg.k_alpha();
  StateDerivative d;
  d.dxi_h = cfg.z_star() - (state.z(0) + links.follower_sum);
  d.dz.resize(cfg.n());
  d.dz(0) = -k * (state.z(0) - state.xi_h);
  for (int i = 1; i < cfg.n(); ++i) {
    d.dz(i) = -k * (state.z(i) - links.upstream(i));
  }
  return d;
}

SystemState equilibrium(const ProtocolConfig& cfg) {
  const double beta = cfg.z_star() / cfg.n();
  return SystemState{beta, Vector::Constant(cfg.n(), beta)};
}

ShiftedState to_shifted(const SystemState& state, const ProtocolConfig& cfg) {
  check_dims(state, cfg);
  const double xi_h0 = cfg.z_star() / cfg.n();
  return ShiftedState{state.xi_h - xi_h0, state.z.array() - state.xi_h};
}

SystemState from_shifted(const ShiftedState& shifted, const ProtocolConfig& cfg) {
  if (shifted.y.size() != cfg.n()) throw ConfigError("shifted state has wrong length");
  const double xi_h = shifted.psi_h + cfg.z_star() / cfg.n();
  return SystemState{xi_h, shifted.y.array() + xi_h};
}

ShiftedDerivative shifted_derivative(const ShiftedState& shifted, const ProtocolConfig& cfg) {
  if (shifted.y.size() != cfg.n()) throw ConfigError("shifted state has wrong length");
  const double eps = cfg.epsilon();
  const auto& y = shifted.y;
  ShiftedDerivative d;
  d.dpsi_h = -cfg.n() * shifted.psi_h - y.sum();
  d.dy.resize(cfg.n());
  d.dy(0) = (-y(0) - eps * d.dpsi_h) / eps;
  for (int i = 1; i < cfg.n(); ++i) {
    d.dy(i) = (-(y(i) - y(i - 1)) - eps * d.dpsi_h) / eps;
  }
  return d;
}

double p2_reference(double p_d, std::span<const double> pe, std::span<const double> pr) {
  if (pe.size() != pr.size()) {
    throw ConfigError("pe and pr must have the same length (" + std::to_string(pe.size()) +
                      " vs " + std::to_string(pr.size()) + ")");
  }
  double available = 0.0;
  for (std::size_t i = 0; i < pe.size(); ++i) available += pe[i] + pr[i];
  return p_d - available;
}

Vector pack(const SystemState& state) {
  Vector flat(state.z.size() + 1);
  flat(0) = state.xi_h;
  flat.tail(state.z.size()) = state.z;
  return flat;
}

SystemState unpack(const Eigen::Ref<const Vector>& flat, int n) {
  if (flat.size() < n + 1) throw ConfigError("flat state shorter than n + 1");
  return SystemState{flat(0), flat.segment(1, n)};
}

void require_finite(const SystemState& state) {
  if (!std::isfinite(state.xi_h) || !state.z.allFinite()) {
    throw AnalysisError("state contains NaN or Inf");
  }
}

}  // namespace lfcons
