#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "trackpace/solver.hpp"
#include "trackpace/transcription.hpp"

using namespace trackpace;
using doctest::Approx;

namespace {

std::vector<double> random_interior_point(const RaceNlp& p, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.15, 0.85);
  const auto& lo = p.lower_bounds();
  const auto& hi = p.upper_bounds();
  std::vector<double> x(p.num_vars());
  for (int i = 0; i < p.num_vars(); ++i) {
    x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
  }
  // keep states in a physically plausible box so the gap values stay sane
  for (int r = 0; r < p.runner_count(); ++r) {
    double y = 0.0;
    for (int i = 0; i < p.grid().n_nodes; ++i) {
      x[p.var_z(r, i)] = 0.8 + 0.4 * unit(rng);  // v about 2.4 .. 3.6 m/s scaled
      y += 0.02 * (1.0 + unit(rng));
      x[p.var_y(r, i)] = y;
    }
    x[p.var_y(r, 0)] = lo[p.var_y(r, 0)];
    x[p.var_z(r, 0)] = lo[p.var_z(r, 0)];
    x[p.var_e(r, 0)] = lo[p.var_e(r, 0)];
  }
  return x;
}

int sign_changes(const std::vector<double>& r, double tol = 0.01) {
  int changes = 0;
  int last = 0;
  for (double v : r) {
    const int s = v > tol ? 1 : (v < -tol ? -1 : 0);
    if (s != 0) {
      if (last != 0 && s != last) ++changes;
      last = s;
    }
  }
  return changes;
}

}  // namespace

TEST_CASE("smallest grid still forms a well-posed problem") {
  const Grid g = Grid::uniform(200.0, 2);
  const RaceNlp p = transcribe_single(Track::preset("STRAIGHT"), 1, RunnerParams::preset("A1"), g);
  CHECK(p.num_vars() == 9);
  CHECK(p.num_eq() == 4);
  CHECK(p.num_ineq() == 2);
  std::vector<double> x(p.num_vars(), 0.5), ceq(p.num_eq()), cineq(p.num_ineq());
  p.constraints(x, ceq, cineq);
  const auto rows = p.jacobian_sparsity();
  CHECK(static_cast<int>(rows.size()) == p.num_eq() + p.num_ineq());
  for (const auto& row : rows) CHECK(!row.empty());
}

TEST_CASE("defects vanish at second order on simulated trajectories") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");

  auto defect_norm = [&](int n_nodes) {
    const Grid g = Grid::uniform(200.0, n_nodes);
    std::vector<double> s(n_nodes), f(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
      s[i] = g.node(i);
      const double c = track.curvature(1, s[i]);
      const double cap2 = a1.f_max * a1.f_max - c * c * 10000.0;  // loose cap at v = 10
      f[i] = std::min(0.7 * a1.f_max, 0.9 * std::sqrt(cap2));
    }
    const auto sim = simulate_forward(track, 1, a1, s, f, 16);
    RaceNlp::RunnerStates st;
    st.y.resize(n_nodes);
    st.z.resize(n_nodes);
    st.e.resize(n_nodes);
    st.f = f;
    st.u.resize(n_nodes - 1);
    for (int i = 0; i < n_nodes; ++i) {
      const auto& pt = sim.trajectory.points[static_cast<std::size_t>(i) * 16];
      st.y[i] = pt.t;
      st.z[i] = 1.0 / pt.v;
      st.e[i] = pt.e;
    }
    for (int i = 0; i + 1 < n_nodes; ++i) st.u[i] = (f[i + 1] - f[i]) / g.h;

    const RaceNlp p = transcribe_single(track, 1, a1, g);
    const auto x = p.pack(st);
    std::vector<double> ceq(p.num_eq()), cineq(p.num_ineq());
    p.constraints(x, ceq, cineq);
    double worst = 0.0;
    for (int i = 0; i < n_nodes - 1; ++i) {
      worst = std::max(worst, std::abs(ceq[p.row_yd(0, i)]));
      worst = std::max(worst, std::abs(ceq[p.row_zd(0, i)]));
      worst = std::max(worst, std::abs(ceq[p.row_ed(0, i)]));
    }
    return worst;
  };

  const double coarse = defect_norm(101);
  const double fine = defect_norm(201);
  CHECK(fine < coarse);
  CHECK(coarse / fine == Approx(4.0).epsilon(0.5));  // trapezoidal order
}

TEST_CASE("jacobian sparsity matches dense finite differences") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");

  auto check_problem = [](const RaceNlp& p, unsigned seed) {
    const auto x = random_interior_point(p, seed);
    const auto pattern = p.jacobian_sparsity();
    const int n = p.num_vars();
    const int m = p.num_eq() + p.num_ineq();
    std::vector<double> ceq_p(p.num_eq()), cin_p(p.num_ineq());
    std::vector<double> ceq_m(p.num_eq()), cin_m(p.num_ineq());
    std::vector<double> xp(x), xm(x);
    std::vector<double> fd(static_cast<std::size_t>(m) * n);
    for (int j = 0; j < n; ++j) {
      const double step = 1e-6 * (1.0 + std::abs(x[j]));
      xp[j] = x[j] + step;
      xm[j] = x[j] - step;
      p.constraints(xp, ceq_p, cin_p);
      p.constraints(xm, ceq_m, cin_m);
      for (int r = 0; r < p.num_eq(); ++r) {
        fd[static_cast<std::size_t>(r) * n + j] = (ceq_p[r] - ceq_m[r]) / (2.0 * step);
      }
      for (int r = 0; r < p.num_ineq(); ++r) {
        fd[static_cast<std::size_t>(p.num_eq() + r) * n + j] = (cin_p[r] - cin_m[r]) / (2.0 * step);
      }
      xp[j] = x[j];
      xm[j] = x[j];
    }
    std::vector<double> row(n);
    for (int r = 0; r < m; ++r) {
      std::fill(row.begin(), row.end(), 0.0);
      p.jacobian_row(x, r, row);
      for (int j = 0; j < n; ++j) {
        const double f = fd[static_cast<std::size_t>(r) * n + j];
        const bool structural =
            std::find(pattern[r].begin(), pattern[r].end(), j) != pattern[r].end();
        if (!structural) {
          CHECK(std::abs(f) < 1e-6);   // nothing missing from the pattern
          CHECK(row[j] == 0.0);
        } else {
          CHECK(row[j] == Approx(f).epsilon(1e-4).scale(1.0));
        }
      }
    }
  };

  check_problem(transcribe_single(track, 1, a1, Grid::uniform(200.0, 10)), 41);

  const InteractionConfig cfg;  // eta = 20 with h = 20 gives a one-node window
  check_problem(transcribe_pair(track, {1, 2}, {a1, a1}, cfg, Grid::uniform(200.0, 11),
                                WinnerBranch::Runner1Wins), 42);
}

TEST_CASE("gradient check on transcribed problems") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");

  const RaceNlp single = transcribe_single(track, 1, a1, Grid::uniform(200.0, 41));
  CHECK(gradient_check(single, random_interior_point(single, 7)) < 1e-5);

  InteractionConfig cfg;
  cfg.eta = 20.0;  // h = 5 -> 4-node window
  const RaceNlp pair = transcribe_pair(track, {1, 2}, {a1, a1}, cfg, Grid::uniform(200.0, 41),
                                       WinnerBranch::Runner2Wins);
  CHECK(gradient_check(pair, random_interior_point(pair, 8)) < 1e-4);
}

TEST_CASE("pair problem with gamma 0 decouples into the single problems") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  const Grid g = Grid::uniform(200.0, 51);
  InteractionConfig off;
  off.gamma = 0.0;

  const RaceNlp pair = transcribe_pair(track, {1, 2}, {a1, a1}, off, g, WinnerBranch::Runner1Wins);
  const RaceNlp s1 = transcribe_single(track, 1, a1, g);
  const RaceNlp s2 = transcribe_single(track, 2, a1, g);

  const auto x1 = s1.initial_guess(GuessStrategy::ConstantSpeed);
  const auto x2 = s2.initial_guess(GuessStrategy::ConstantSpeed);
  const auto st1 = s1.unpack(x1, 0);
  const auto st2 = s2.unpack(x2, 0);
  const auto xp = pair.pack(st1, &st2);

  std::vector<double> ceq_p(pair.num_eq()), cin_p(pair.num_ineq());
  std::vector<double> ceq_1(s1.num_eq()), cin_1(s1.num_ineq());
  std::vector<double> ceq_2(s2.num_eq()), cin_2(s2.num_ineq());
  pair.constraints(xp, ceq_p, cin_p);
  s1.constraints(x1, ceq_1, cin_1);
  s2.constraints(x2, ceq_2, cin_2);

  for (int i = 0; i < g.n_nodes - 1; ++i) {
    CHECK(ceq_p[pair.row_zd(0, i)] == ceq_1[s1.row_zd(0, i)]);
    CHECK(ceq_p[pair.row_zd(1, i)] == ceq_2[s2.row_zd(0, i)]);
    CHECK(ceq_p[pair.row_ed(0, i)] == ceq_1[s1.row_ed(0, i)]);
  }
  for (int i = 0; i < g.n_nodes; ++i) {
    CHECK(cin_p[pair.ineq_centrifugal(0, i)] == cin_1[s1.ineq_centrifugal(0, i)]);
    CHECK(cin_p[pair.ineq_centrifugal(1, i)] == cin_2[s2.ineq_centrifugal(0, i)]);
  }
}

TEST_CASE("eta 0 leaves the inhibition identically one") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  InteractionConfig cfg;
  cfg.eta = 0.0;
  const Grid g = Grid::uniform(200.0, 41);
  const RaceNlp pair = transcribe_pair(track, {1, 2}, {a1, a1}, cfg, g, WinnerBranch::Runner1Wins);
  const auto x = random_interior_point(pair, 3);
  for (double v : pair.inhibition_profile(x)) CHECK(v == 1.0);
}

TEST_CASE("optimized kernels agree with the serial reference") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  const RunnerParams a2 = RunnerParams::preset("A2");

  InteractionConfig cfg;
  cfg.eta = 20.0;
  RaceNlp pair = transcribe_pair(track, {2, 3}, {a1, a2}, cfg, Grid::uniform(200.0, 101),
                                 WinnerBranch::Runner2Wins);
  const auto x = random_interior_point(pair, 77);
  std::vector<double> ceq_a(pair.num_eq()), cin_a(pair.num_ineq());
  std::vector<double> ceq_b(pair.num_eq()), cin_b(pair.num_ineq());
  pair.constraints(x, ceq_a, cin_a);
  pair.constraints_reference(x, ceq_b, cin_b);
  for (int r = 0; r < pair.num_eq(); ++r) {
    CHECK(ceq_a[r] == Approx(ceq_b[r]).epsilon(1e-12).scale(1.0));
  }
  for (int r = 0; r < pair.num_ineq(); ++r) {
    CHECK(cin_a[r] == Approx(cin_b[r]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("parallel and serial kernels produce identical bits") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  InteractionConfig cfg;
  cfg.eta = 20.0;
  RaceNlp pair = transcribe_pair(track, {4, 5}, {a1, a1}, cfg, Grid::uniform(200.0, 201),
                                 WinnerBranch::Runner1Wins);
  const auto x = random_interior_point(pair, 5);

  std::vector<double> ceq_a(pair.num_eq()), cin_a(pair.num_ineq());
  std::vector<double> grad_a(pair.num_vars(), 0.0);
  std::vector<double> w_eq(pair.num_eq(), 0.3), w_in(pair.num_ineq(), -0.2);
  pair.set_parallel(true);
  pair.constraints(x, ceq_a, cin_a);
  pair.add_weighted_constraint_gradient(x, w_eq, w_in, grad_a);

  std::vector<double> ceq_b(pair.num_eq()), cin_b(pair.num_ineq());
  std::vector<double> grad_b(pair.num_vars(), 0.0);
  pair.set_parallel(false);
  pair.constraints(x, ceq_b, cin_b);
  pair.add_weighted_constraint_gradient(x, w_eq, w_in, grad_b);

  for (int r = 0; r < pair.num_eq(); ++r) CHECK(ceq_a[r] == ceq_b[r]);
  for (int r = 0; r < pair.num_ineq(); ++r) CHECK(cin_a[r] == cin_b[r]);
  for (int j = 0; j < pair.num_vars(); ++j) CHECK(grad_a[j] == grad_b[j]);
}

TEST_CASE("inhibition only sees the trailing window") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  InteractionConfig cfg;
  cfg.eta = 20.0;
  const Grid g = Grid::uniform(200.0, 101);  // h = 2, window = 10 nodes
  const RaceNlp pair = transcribe_pair(track, {1, 2}, {a1, a1}, cfg, g, WinnerBranch::Runner1Wins);
  auto x = random_interior_point(pair, 11);
  const auto inhib_before = pair.inhibition_profile(x);

  // nudge the states at node 5; indicators from node 16 onward cannot move
  x[pair.var_y(0, 5)] += 0.01;
  x[pair.var_z(1, 5)] += 0.02;
  const auto inhib_after = pair.inhibition_profile(x);
  for (int j = 16; j < g.n_nodes; ++j) {
    CHECK(inhib_after[j] == inhib_before[j]);
  }
}

TEST_CASE("grid rejects windows that do not divide the step") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  InteractionConfig cfg;  // eta = 20
  CHECK_THROWS_AS(transcribe_pair(track, {1, 2}, {a1, a1}, cfg, Grid::uniform(200.0, 1000),
                                  WinnerBranch::Runner1Wins),
                  std::invalid_argument);
  // decoupled lanes do not need the window at all
  CHECK_NOTHROW(transcribe_pair(track, {1, 6}, {a1, a1}, cfg, Grid::uniform(200.0, 1000),
                                WinnerBranch::Runner1Wins));
}

TEST_CASE("infeasible start speed is rejected at construction") {
  const Track tight = Track::standard(200.0 - 3.14159265358979 * 0.5, 200.0);  // 0.5 m bend
  CHECK_THROWS_AS(transcribe_single(tight, 1, RunnerParams::preset("A1"), Grid::uniform(200.0, 41)),
                  std::invalid_argument);
}

TEST_CASE("constant speed guess seeds a 20 s race") {
  const RaceNlp p = transcribe_single(Track::preset("STD"), 1, RunnerParams::preset("A1"),
                                      Grid::uniform(200.0, 101));
  const auto x = p.initial_guess(GuessStrategy::ConstantSpeed);
  const auto st = p.unpack(x, 0);
  CHECK(1.0 / st.z[50] == Approx(10.0));
  CHECK(st.y.back() == Approx(20.0).epsilon(0.05));
  CHECK(st.e.front() == Approx(RunnerParams::preset("A1").e0));
  CHECK(st.e.back() == Approx(0.0).scale(1.0));
  CHECK(st.z.front() == Approx(0.43));
}

TEST_CASE("pack and unpack round trip") {
  const RaceNlp p = transcribe_single(Track::preset("DB1"), 3, RunnerParams::preset("A2"),
                                      Grid::uniform(200.0, 51));
  const auto x = p.initial_guess(GuessStrategy::ConstantSpeed);
  const auto st = p.unpack(x, 0);
  const auto x2 = p.pack(st);
  for (int j = 0; j < p.num_vars(); ++j) CHECK(x[j] == Approx(x2[j]).epsilon(1e-13).scale(1.0));
}

TEST_CASE("solo guess reproduces the provided trajectories exactly") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  const Grid g = Grid::uniform(200.0, 101);
  const RaceNlp s1 = transcribe_single(track, 1, a1, g);
  const RaceNlp s2 = transcribe_single(track, 2, a1, g);
  const auto solo1 = s1.unpack(s1.initial_guess(GuessStrategy::ConstantSpeed), 0);
  const auto solo2 = s2.unpack(s2.initial_guess(GuessStrategy::ConstantSpeed), 0);

  const RaceNlp pair = transcribe_pair(track, {1, 2}, {a1, a1}, InteractionConfig{}, g,
                                       WinnerBranch::Runner1Wins);
  const auto x = pair.initial_guess(GuessStrategy::SoloSolution, &solo1, &solo2);
  const auto got1 = pair.unpack(x, 0);
  const auto got2 = pair.unpack(x, 1);
  for (int i = 0; i < g.n_nodes; ++i) {
    CHECK(got1.y[i] == Approx(solo1.y[i]).epsilon(1e-13).scale(1.0));
    CHECK(got2.z[i] == Approx(solo2.z[i]).epsilon(1e-13).scale(1.0));
    CHECK(got1.f[i] == Approx(solo1.f[i]).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("perturbed guess seeds two overtakings") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  const Grid g = Grid::uniform(200.0, 201);
  const RaceNlp s5 = transcribe_single(track, 5, a1, g);
  const RaceNlp s4 = transcribe_single(track, 4, a1, g);
  const auto solo5 = s5.unpack(s5.initial_guess(GuessStrategy::ConstantSpeed), 0);
  const auto solo4 = s4.unpack(s4.initial_guess(GuessStrategy::ConstantSpeed), 0);

  const RaceNlp pair = transcribe_pair(track, {5, 4}, {a1, a1}, InteractionConfig{}, g,
                                       WinnerBranch::Runner1Wins);
  const auto x = pair.initial_guess(GuessStrategy::PerturbedOvertakes, &solo5, &solo4);
  CHECK(sign_changes(pair.gap_profile(x)) == 2);

  const auto x_solo = pair.initial_guess(GuessStrategy::SoloSolution, &solo5, &solo4);
  CHECK(sign_changes(pair.gap_profile(x_solo)) == 0);
}

TEST_CASE("winner branch affects objective and ordering row") {
  const Track track = Track::preset("STD");
  const RunnerParams a1 = RunnerParams::preset("A1");
  const Grid g = Grid::uniform(200.0, 21);
  const RaceNlp p1 = transcribe_pair(track, {3, 3}, {a1, a1}, InteractionConfig{}, g,
                                     WinnerBranch::Runner1Wins);
  const RaceNlp p2 = transcribe_pair(track, {3, 3}, {a1, a1}, InteractionConfig{}, g,
                                     WinnerBranch::Runner2Wins);
  auto x = random_interior_point(p1, 2);
  // plant final times of 20 s and 22 s
  auto st1 = p1.unpack(x, 0);
  auto st2 = p1.unpack(x, 1);
  st1.y.back() = 20.0;
  st2.y.back() = 22.0;
  x = p1.pack(st1, &st2);
  const double kw = kDefaultWinnerWeight;
  CHECK(p1.objective(x) == Approx((20.0 * (1.0 + kw) + 22.0 * kw) / 20.0));
  CHECK(p2.objective(x) == Approx((22.0 * (1.0 + kw) + 20.0 * kw) / 20.0));
  std::vector<double> ceq(p1.num_eq()), cin(p1.num_ineq());
  p1.constraints(x, ceq, cin);
  CHECK(cin[p1.ineq_ordering()] < 0.0);
  p2.constraints(x, ceq, cin);
  CHECK(cin[p2.ineq_ordering()] > 0.0);
}
