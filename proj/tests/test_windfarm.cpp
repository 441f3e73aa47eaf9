#include <doctest.h>

#include <cmath>
#include <random>

#include "lfcons/windfarm.hpp"

using namespace lfcons;

namespace {

WindFarmScenario small_scenario(int n, double pe, double pr, double p_d) {
  WindFarmScenario sc;
  sc.n = n;
  sc.k_alpha = 100.0;
  sc.t_storage = 1e-3;
  sc.sim = SimConfig{1e-4, 3.0, 0.0, 10};
  sc.wind.pe_mean = Vector::Constant(n, pe);
  sc.wind.pr_mean = Vector::Constant(n, pr);
  sc.initial_pd = p_d;
  return sc;
}

}  // namespace

TEST_CASE("P2 is P1 with the wind-corrected reference") {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 8;
    const SystemState s{u(rng), Vector::NullaryExpr(n, [&] { return u(rng); })};
    WindSample w{Vector::NullaryExpr(n, [&] { return 2.0 + u(rng); }), Vector::NullaryExpr(n, [&] { return 0.5 + 0.1 * u(rng); })};
    const double p_d = 10.0 + u(rng);
    double z_star = p_d;
    for (int i = 0; i < n; ++i) z_star -= w.pe(i) + w.pr(i);
    const auto a = p2_derivative(s, n, 50.0, p_d, w);
    const auto b = p1_derivative(s, ProtocolConfig::from_gain(n, 50.0, z_star));
    // Summation order differs from the library's, so dxi agrees to rounding only.
    CHECK(std::abs(a.dxi_h - b.dxi_h) <= 1e-12 * (1.0 + std::abs(p_d)));
    CHECK(a.dz == b.dz);
  }
}

TEST_CASE("zero mismatch leaves storage idle") {
  auto sc = small_scenario(4, 2.0, 0.5, 10.0);
  const auto traj = simulate(sc);
  for (const auto& s : traj.states) CHECK(s.cwiseAbs().maxCoeff() == 0.0);
  const auto rep = fairness_report(sc, traj);
  CHECK(rep.fair);
  CHECK(rep.settling_time == 0.0);
}

TEST_CASE("a power deficit is shared equally") {
  // Wind delivers 8 MW against P_d = 10: each of 10 units supplies 0.2 MW.
  auto sc = small_scenario(10, 0.6, 0.2, 10.0);
  const auto traj = simulate(sc);
  const Vector x = traj.states.back().tail(10);
  CHECK((x.array() - 0.2).abs().maxCoeff() <= 1e-6);
  CHECK(total_output(sc, sc.sim.t_end, traj.states.back()) == doctest::Approx(10.0).epsilon(1e-7));

  const auto rep = fairness_report(sc, traj);
  CHECK(rep.fair);
  CHECK(rep.tracking_ok);
  CHECK(rep.spread <= 1e-6);
  CHECK(rep.sum_storage == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(rep.mismatch <= 1e-6);
}

TEST_CASE("a demand step moves every unit by its share") {
  auto sc = small_scenario(10, 0.6, 0.2, 10.0);
  sc.sim.t_end = 6.0;
  sc.pd_schedule = EventSchedule({{3.0, 11.0}});
  const auto traj = simulate(sc);
  const auto before = traj.states[static_cast<std::size_t>(std::lround(3.0 / 1e-3)) - 1].tail(10);
  const auto after = traj.states.back().tail(10);
  CHECK(((after - before).array() - 0.1).abs().maxCoeff() <= 1e-5);
  const double st = settling_time(sc, traj);
  CHECK(std::isfinite(st));
  CHECK(st > 0.0);
  CHECK(st < 1.0);
}

TEST_CASE("storage first-order lag") {
  CHECK(storage_dynamics(0.0, 1.0, 1e-3) == doctest::Approx(1000.0));
  CHECK(storage_dynamics(2.0, 2.0, 0.5) == 0.0);
  CHECK(storage_dynamics(1.0, 0.0, 0.25) == -4.0);
  CHECK_THROWS_AS(storage_dynamics(0.0, 1.0, 0.0), ConfigError);

  // Five time constants: x = 1 - e^-5 for a unit target.
  const double ts = 1e-3;
  const VectorField lag = [ts](double, const Vector& x, double, Vector& dx) {
    dx.resize(1);
    dx(0) = storage_dynamics(x(0), 1.0, ts);
  };
  const auto traj = integrate(lag, Vector::Zero(1), SimConfig{1e-5, 5 * ts, 0.0, 1});
  CHECK(traj.states.back()(0) == doctest::Approx(1.0 - std::exp(-5.0)).epsilon(1e-9));
}

TEST_CASE("total output uses delivered storage power") {
  auto sc = small_scenario(2, 1.0, 0.5, 0.0);
  Vector s = initial_state(sc);
  CHECK(s.size() == 5);
  CHECK(s.isZero(0.0));
  s << 0.0, 9.0, 9.0, 0.25, -0.5;  // z ignored
  CHECK(total_output(sc, 0.0, s) == doctest::Approx(2.75));
  CHECK_THROWS_AS(total_output(sc, 0.0, Vector::Zero(3)), ConfigError);
}

TEST_CASE("fairness report at a hand-built equilibrium") {
  auto sc = small_scenario(2, 3.0, 1.0, 10.0);
  Trajectory traj;
  Vector s(5);
  s << 1.0, 1.0, 1.0, 1.0, 1.0;
  for (int k = 0; k <= 10; ++k) {
    traj.times.push_back(2.8 + 0.02 * k);
    traj.states.push_back(s);
  }
  const auto rep = fairness_report(sc, traj, 2.8, 3.0);
  CHECK(rep.spread == 0.0);
  CHECK(rep.sum_storage == 2.0);
  CHECK(rep.mismatch == 0.0);
  CHECK(rep.z_star == 2.0);
  CHECK(rep.fair);
  CHECK(rep.tracking_ok);
  CHECK_THROWS_AS(fairness_report(sc, traj, 4.0, 5.0), ConfigError);
}

TEST_CASE("a mis-gained follower breaks fairness") {
  auto sc = small_scenario(10, 0.6, 0.2, 10.0);
  sc.fault = GainFault{4, 0.0};
  const auto rep = fairness_report(sc, simulate(sc));
  CHECK_FALSE(rep.fair);
  CHECK(rep.spread > 0.1);

  sc.fault = GainFault{1, 0.5};
  CHECK_THROWS_AS(simulate(sc), ConfigError);
}

TEST_CASE("scenario validation") {
  auto sc = small_scenario(3, 1.0, 0.0, 3.0);
  CHECK_NOTHROW(sc.validate());
  auto bad = sc;
  bad.t_storage = 2e-3;  // epsilon / 10 = 1e-3
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = sc;
  bad.wind.pe_mean = Vector::Constant(4, 1.0);
  bad.wind.pr_mean = Vector::Constant(4, 1.0);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = sc;
  bad.delays.neighbor = 1.5e-4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = sc;
  bad.pd_schedule = EventSchedule({{1.00005, 1.0}});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("default scenarios settle fairly, the delayed one more slowly") {
  const auto sc1 = default_scenario(0.0);
  const auto sc2 = default_scenario(0.005);
  const auto r1 = fairness_report(sc1, simulate(sc1));
  const auto r2 = fairness_report(sc2, simulate(sc2));
  CHECK(r1.fair);
  CHECK(r1.tracking_ok);
  CHECK(r2.fair);
  CHECK(r2.tracking_ok);
  CHECK(std::isfinite(r1.settling_time));
  CHECK(std::isfinite(r2.settling_time));
  CHECK(r2.settling_time > r1.settling_time);
}

TEST_CASE("delayed simulation with zero lag matches the undelayed path") {
  auto sc = small_scenario(5, 0.6, 0.2, 5.0);
  sc.sim.t_end = 1.0;
  sc.pd_schedule = EventSchedule({{0.5, 6.0}});
  const auto plain = simulate(sc);
  // Aggregate lag only: the neighbor path runs without delay.
  sc.delays.aggregate = 1e-4;
  const auto delayed = simulate(sc);
  REQUIRE(plain.size() == delayed.size());
  CHECK((plain.states.back() - delayed.states.back()).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(delayed.columns.size() == 11);
  CHECK(delayed.columns.front() == "xi_h");
  CHECK(delayed.columns.back() == "x_5");
}

TEST_CASE("wind profiles") {
  WindProfile w;
  w.pe_mean = Vector::LinSpaced(6, 1.0, 2.0);
  w.pr_mean = Vector::Constant(6, 0.25);

  SUBCASE("constant") {
    for (double t : {0.0, 1.0, 100.0}) {
      const auto s = wind_profile(w, t);
      CHECK(s.pe == w.pe_mean);
      CHECK(s.pr == w.pr_mean);
    }
  }
  SUBCASE("step") {
    w.kind = WindProfileKind::step;
    w.step_time = 1.0;
    w.step_delta = 0.5;
    CHECK(wind_profile(w, 0.999).pe == w.pe_mean);
    CHECK(((wind_profile(w, 1.0).pe - w.pe_mean).array() - 0.5).abs().maxCoeff() <= 1e-15);
  }
  SUBCASE("sinusoid stays within its amplitude and its phases cancel") {
    w.kind = WindProfileKind::sinusoid;
    w.amplitude = 0.3;
    w.period = 2.0;
    for (double t = 0.0; t < 4.0; t += 0.037) {
      const auto s = wind_profile(w, t);
      CHECK((s.pe - w.pe_mean).cwiseAbs().maxCoeff() <= 0.3 + 1e-15);
      // Equally spaced phases sum to zero.
      CHECK(std::abs(s.pe.sum() - w.pe_mean.sum()) <= 1e-12);
    }
  }
  SUBCASE("seeded noise") {
    w.kind = WindProfileKind::seeded_noise;
    w.amplitude = 0.2;
    w.hold_time = 0.5;
    w.seed = 42;
    const auto a = wind_profile(w, 0.1);
    CHECK(a.pe == wind_profile(w, 0.1).pe);
    CHECK(a.pe == wind_profile(w, 0.45).pe);  // same hold slot
    CHECK(a.pe != wind_profile(w, 0.6).pe);
    CHECK((a.pe - w.pe_mean).cwiseAbs().maxCoeff() <= 0.2);
    auto other = w;
    other.seed = 43;
    CHECK(a.pe != wind_profile(other, 0.1).pe);
  }
  SUBCASE("names") {
    for (auto k : {WindProfileKind::constant, WindProfileKind::step, WindProfileKind::sinusoid,
                   WindProfileKind::seeded_noise}) {
      CHECK(parse_wind_profile_kind(to_string(k)) == k);
    }
    CHECK_THROWS_AS(parse_wind_profile_kind("gusty"), ConfigError);
  }
  SUBCASE("validation") {
    w.amplitude = -1.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    w.amplitude = 0.0;
    w.pr_mean = Vector::Zero(5);
    CHECK_THROWS_AS(w.validate(), ConfigError);
  }
}
