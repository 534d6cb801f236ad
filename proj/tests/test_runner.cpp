#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "trackpace/runner.hpp"
#include "trackpace/track.hpp"

using namespace trackpace;
using doctest::Approx;

namespace {
const double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("aerobic power is linear in the deficit") {
  const RunnerParams p = RunnerParams::preset("A1");
  CHECK(sigma(p.e0, p) == 0.0);
  CHECK(sigma(0.0, p) == Approx(20.0));
  CHECK(sigma(p.e0 / 2.0, p) == Approx(10.0));
  CHECK(sigma(-5.0, p) == Approx(20.0));  // clamped below
}

TEST_CASE("state rhs") {
  const RunnerParams p = RunnerParams::preset("A1");

  // equilibrium speed v = f tau makes dz vanish
  RaceState st;
  st.f = 5.0;
  st.z = 1.0 / (st.f * p.tau);
  st.e = 700.0;
  st.y = 3.0;
  CHECK(state_rhs(st, 0.0, p).z == Approx(0.0).scale(1.0));

  // aerobic-only balance: f = sigma(e) z makes de vanish
  st.z = 0.2;
  st.f = sigma(st.e, p) * st.z;
  CHECK(state_rhs(st, 0.0, p).e == Approx(0.0).scale(1.0));

  // initial time slope equals the initial inverse speed
  st.z = 0.43;
  CHECK(state_rhs(st, 0.0, p).y == Approx(0.43));

  // control feeds straight into df
  CHECK(state_rhs(st, 0.011, p).f == Approx(0.011));
}

TEST_CASE("dimensional sanity of the friction/force pair") {
  const RunnerParams base = RunnerParams::preset("A1");
  for (double lambda : {0.5, 2.0, 3.7}) {
    RunnerParams scaled = base;
    scaled.tau = base.tau / lambda;
    RaceState st;
    st.f = 4.0;
    st.z = 1.0 / (st.f * base.tau);
    st.e = 500.0;
    RaceState st2 = st;
    st2.f = lambda * st.f;  // same equilibrium speed: v = (lambda f)(tau/lambda)
    CHECK(state_rhs(st, 0.0, base).z == Approx(0.0).scale(1.0));
    CHECK(state_rhs(st2, 0.0, scaled).z == Approx(0.0).scale(1.0));
  }
}

TEST_CASE("max tangential force") {
  CHECK(max_tangential_force(0.1, 0.0, 9.45) == Approx(9.45));

  // centripetal demand at v = 10, R = 40 is 2.5 N/kg
  const double c = 1.0 / 40.0;
  CHECK(c * 10.0 * 10.0 == Approx(2.5));

  // A2 on the standard lane-1 bend at v = 10.9
  const double z = 1.0 / 10.9;
  const double r1 = 36.8;
  const double expected = std::sqrt(169.0 - std::pow(10.9, 4) / (r1 * r1));
  CHECK(max_tangential_force(z, 1.0 / r1, 13.0) == Approx(expected).epsilon(1e-12));

  // infeasible speed for the curvature
  CHECK_THROWS_AS(max_tangential_force(1.0 / 40.0, 1.0 / 20.0, 6.5), std::domain_error);
}

TEST_CASE("max tangential force is monotone") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> vdist(3.0, 12.0), cdist(0.0, 1.0 / 25.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double v = vdist(rng);
    const double c1 = cdist(rng), c2 = cdist(rng);
    const double f_max = 13.0;
    const double lo = std::min(c1, c2), hi = std::max(c1, c2);
    CHECK(max_tangential_force(1.0 / v, lo, f_max) >= max_tangential_force(1.0 / v, hi, f_max));
    const double v2 = v + 0.5;
    if (hi * v2 * v2 < f_max) {
      CHECK(max_tangential_force(1.0 / v, hi, f_max) >= max_tangential_force(1.0 / v2, hi, f_max));
    }
    CHECK(max_tangential_force(1.0 / v, 0.0, f_max) == Approx(f_max));
  }
}

TEST_CASE("equilibrium speeds reproduce the saturated pace") {
  const RunnerParams a1 = RunnerParams::preset("A1");
  CHECK(equilibrium_speed(kInf, a1) == Approx(11.15).epsilon(1e-3));

  const Track std_track = Track::preset("STD");
  const double r1 = 1.0 / std_track.curvature(1, 0.0);
  const double r8 = 1.0 / std_track.curvature(8, 0.0);
  CHECK(equilibrium_speed(r1, a1) == Approx(10.56).epsilon(1e-3));
  CHECK(equilibrium_speed(r8, a1) == Approx(10.74).epsilon(1e-3));

  // strictly increasing in the radius
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> rdist(15.0, 600.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double ra = rdist(rng), rb = rdist(rng);
    if (ra == rb) continue;
    const double lo = std::min(ra, rb), hi = std::max(ra, rb);
    CHECK(equilibrium_speed(lo, a1) < equilibrium_speed(hi, a1));
  }
  CHECK(equilibrium_speed(1e9, a1) == Approx(a1.f_max * a1.tau).epsilon(1e-6));
}

TEST_CASE("lean angle and ground reaction") {
  CHECK(lean_angle(0.0, 40.0) == 0.0);
  CHECK(ground_reaction(0.0, 40.0) == Approx(PhysConstants::g));
  CHECK(lean_angle(10.0, 40.0) == Approx(std::atan(2.5 / 9.81)).epsilon(1e-12));
  CHECK(ground_reaction(10.0, 40.0) == Approx(std::sqrt(9.81 * 9.81 + 2.5 * 2.5)).epsilon(1e-12));
  CHECK(lean_angle(11.0, kInf) == 0.0);
  CHECK(ground_reaction(11.0, kInf) == Approx(PhysConstants::g));
}

TEST_CASE("runner presets and json") {
  const RunnerParams a2 = RunnerParams::preset("A2");
  CHECK(a2.tau == Approx(0.85));
  CHECK(a2.e0 == Approx(2160.0));
  CHECK(a2.f_max == Approx(13.0));
  CHECK(a2.z0 == Approx(0.43));
  CHECK(a2.u_max == Approx(0.015));
  CHECK(a2.sigma_f == Approx(20.0));

  const auto j = nlohmann::json{{"tau", 1.0}, {"e0", 1200.0}, {"f_max", 8.0},
                                {"z0", 0.4}, {"u_max", 0.02}, {"sigma_f", 18.0}};
  const RunnerParams custom = RunnerParams::from_json(j);
  CHECK(custom.tau == Approx(1.0));
  CHECK(custom.sigma_f == Approx(18.0));

  RunnerParams bad = a2;
  bad.tau = 0.01;  // cannot accelerate from the start
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK_THROWS_AS(RunnerParams::preset("A9"), std::invalid_argument);
}

TEST_CASE("forward simulation holds an equilibrium exactly") {
  const RunnerParams p = RunnerParams::preset("A1");
  const Track t = Track::preset("STRAIGHT");
  const int n = 101;
  std::vector<double> s(n), f(n, 1.0 / (p.z0 * p.tau));
  for (int i = 0; i < n; ++i) s[i] = 200.0 * i / (n - 1);

  const auto sim = simulate_forward(t, 1, p, s, f, 4);
  CHECK(sim.trajectory.final_time == Approx(200.0 * p.z0).epsilon(1e-12));
  CHECK(sim.trajectory.points.back().v == Approx(1.0 / p.z0).epsilon(1e-12));
  CHECK(!sim.energy_violation_s);
  CHECK(!sim.force_violation_s);
}

TEST_CASE("forward simulation saturates toward f_max tau") {
  RunnerParams p = RunnerParams::preset("A1");
  p.e0 = 1e9;  // energy can never bind
  const Track t = Track::preset("STRAIGHT");
  const int n = 201;
  std::vector<double> s(n), f(n, p.f_max);
  for (int i = 0; i < n; ++i) s[i] = 200.0 * i / (n - 1);
  const auto sim = simulate_forward(t, 1, p, s, f, 4);
  double prev = 0.0;
  for (const auto& pt : sim.trajectory.points) {
    CHECK(pt.v >= prev - 1e-12);
    prev = pt.v;
  }
  CHECK(prev < p.f_max * p.tau + 1e-9);
  CHECK(prev == Approx(p.f_max * p.tau).epsilon(1e-3));
}

TEST_CASE("forward simulation reports energy exhaustion") {
  RunnerParams p = RunnerParams::preset("A1");
  p.e0 = 30.0;
  const Track t = Track::preset("STRAIGHT");
  const int n = 201;
  std::vector<double> s(n), f(n, p.f_max);
  for (int i = 0; i < n; ++i) s[i] = 200.0 * i / (n - 1);
  const auto sim = simulate_forward(t, 1, p, s, f, 4);
  REQUIRE(sim.energy_violation_s.has_value());
  CHECK(*sim.energy_violation_s < 100.0);
}

TEST_CASE("forward simulation flags the force circle on a bend") {
  const RunnerParams p = RunnerParams::preset("A3");  // f_max = 6.5
  const Track t = Track::preset("STD");
  const int n = 201;
  std::vector<double> s(n), f(n, p.f_max);  // full force on the bend violates the circle
  for (int i = 0; i < n; ++i) s[i] = 200.0 * i / (n - 1);
  const auto sim = simulate_forward(t, 1, p, s, f, 4);
  REQUIRE(sim.force_violation_s.has_value());
}

TEST_CASE("energy accounting along a simulated race") {
  const RunnerParams p = RunnerParams::preset("A1");
  const Track t = Track::preset("STD");
  const int n = 401;
  std::vector<double> s(n), f(n);
  for (int i = 0; i < n; ++i) {
    s[i] = 200.0 * i / (n - 1);
    f[i] = 5.0 + 2.0 * std::sin(s[i] / 37.0);  // smooth feasible profile
  }
  const auto sim = simulate_forward(t, 1, p, s, f, 8);
  const auto& pts = sim.trajectory.points;

  // total propulsive work f v dt = f ds must match the energy ledger
  double work = 0.0, aerobic = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double ds = pts[i].s - pts[i - 1].s;
    work += 0.5 * ds * (pts[i].f + pts[i - 1].f);
    aerobic += 0.5 * ds * (sigma(pts[i].e, p) / pts[i].v + sigma(pts[i - 1].e, p) / pts[i - 1].v);
  }
  const double spent = p.e0 - pts.back().e;
  CHECK(work == Approx(spent + aerobic).epsilon(1e-3));
}

TEST_CASE("forward simulation converges under step halving") {
  const RunnerParams p = RunnerParams::preset("A1");
  const Track t = Track::preset("STD");
  const int n = 1001;  // operating resolution of the transcribed problems
  std::vector<double> s(n), f(n);
  for (int i = 0; i < n; ++i) {
    s[i] = 200.0 * i / (n - 1);
    f[i] = 6.0 + std::cos(s[i] / 23.0);
  }
  const double t1 = simulate_forward(t, 1, p, s, f, 4).trajectory.final_time;
  const double t2 = simulate_forward(t, 1, p, s, f, 8).trajectory.final_time;
  CHECK(std::abs(t1 - t2) / t2 < 1e-6);
}

TEST_CASE("trajectory splits sum to the final time") {
  const RunnerParams p = RunnerParams::preset("A1");
  const Track t = Track::preset("STD");
  const int n = 101;
  std::vector<double> s(n), f(n, 5.0);
  for (int i = 0; i < n; ++i) s[i] = 200.0 * i / (n - 1);
  const auto traj = simulate_forward(t, 1, p, s, f, 4).trajectory;
  REQUIRE(traj.splits.size() == 4);
  double total = 0.0;
  for (double sp : traj.splits) total += sp;
  CHECK(total == Approx(traj.final_time).epsilon(1e-9));
}
