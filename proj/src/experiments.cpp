#include "trackpace/experiments.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "trackpace/io.hpp"

namespace trackpace {

SolverOptions experiment_solver_options() {
  SolverOptions opts;
  opts.feasibility_tol = 1e-6;
  opts.optimality_tol = 1e-4;
  opts.max_outer_iter = 40;
  opts.max_inner_iter = 800;
  opts.lbfgs_memory = 30;
  return opts;
}

namespace {

constexpr double kFeasibleSlack = 10.0;  // accept iterates within slack * tol

bool is_feasible(const NlpSolution& sol, const SolverOptions& opts) {
  return sol.status != SolveStatus::Infeasible &&
         sol.max_violation <= kFeasibleSlack * opts.feasibility_tol;
}

// Grid ladder for warm-started refinement. Levels must keep the inhibition
// window an integer number of steps.
std::vector<int> grid_ladder(int n_nodes, double length, double eta, bool needs_window) {
  std::vector<int> ladder;
  const int spacing = 4;
  if (n_nodes >= 501 && (n_nodes - 1) % spacing == 0) {
    const int coarse = (n_nodes - 1) / spacing + 1;
    bool ok = true;
    if (needs_window && eta > 0.0) {
      const double w = eta * (coarse - 1) / length;
      ok = std::abs(w - std::round(w)) < 1e-9;
    }
    if (ok) ladder.push_back(coarse);
  }
  ladder.push_back(n_nodes);
  return ladder;
}

RaceNlp::RunnerStates resample_states(const RaceNlp::RunnerStates& st, int n_to, double length) {
  const int n_from = static_cast<int>(st.y.size());
  if (n_from == n_to) return st;
  RaceNlp::RunnerStates out;
  out.y.resize(n_to);
  out.z.resize(n_to);
  out.e.resize(n_to);
  out.f.resize(n_to);
  out.u.resize(n_to - 1);
  auto interp = [&](const std::vector<double>& v, int i) {
    const double pos = static_cast<double>(i) * (n_from - 1) / (n_to - 1);
    const int lo = std::min(static_cast<int>(pos), n_from - 2);
    const double w = pos - lo;
    return v[lo] * (1.0 - w) + v[lo + 1] * w;
  };
  for (int i = 0; i < n_to; ++i) {
    out.y[i] = interp(st.y, i);
    out.z[i] = interp(st.z, i);
    out.e[i] = interp(st.e, i);
    out.f[i] = interp(st.f, i);
  }
  const double h_to = length / (n_to - 1);
  for (int i = 0; i + 1 < n_to; ++i) out.u[i] = (out.f[i + 1] - out.f[i]) / h_to;
  return out;
}

// Multipliers approximate continuous adjoint densities; carry them to the next
// grid by sampling at matching positions and rescaling with the step ratio.
SolverWarmStart interpolate_warm_start(const RaceNlp& coarse, const NlpSolution& sol,
                                       const RaceNlp& fine) {
  SolverWarmStart warm;
  const int nc = coarse.grid().n_nodes;
  const int nf = fine.grid().n_nodes;
  const double ratio = fine.grid().h / coarse.grid().h;
  warm.lambda_eq.assign(fine.num_eq(), 0.0);
  warm.mu_ineq.assign(fine.num_ineq(), 0.0);

  auto sample = [&](auto row_of, int r, double pos, int count_c) {
    const double p = pos * (count_c - 1);
    const int lo = std::min(static_cast<int>(p), count_c - 2);
    const double w = p - lo;
    return sol.lambda_eq[row_of(r, lo)] * (1.0 - w) + sol.lambda_eq[row_of(r, lo + 1)] * w;
  };

  for (int r = 0; r < fine.runner_count(); ++r) {
    for (int i = 0; i + 1 < nf; ++i) {
      const double pos = (nf - 1) <= 1 ? 0.0 : static_cast<double>(i) / (nf - 2);
      warm.lambda_eq[fine.row_yd(r, i)] =
          ratio * sample([&](int rr, int ii) { return coarse.row_yd(rr, ii); }, r, pos, nc - 1);
      warm.lambda_eq[fine.row_zd(r, i)] =
          ratio * sample([&](int rr, int ii) { return coarse.row_zd(rr, ii); }, r, pos, nc - 1);
      warm.lambda_eq[fine.row_ed(r, i)] =
          ratio * sample([&](int rr, int ii) { return coarse.row_ed(rr, ii); }, r, pos, nc - 1);
      warm.lambda_eq[fine.row_fl(r, i)] =
          ratio * sample([&](int rr, int ii) { return coarse.row_fl(rr, ii); }, r, pos, nc - 1);
    }
    for (int i = 0; i < nf; ++i) {
      const double pos = static_cast<double>(i) / (nf - 1);
      const double p = pos * (nc - 1);
      const int lo = std::min(static_cast<int>(p), nc - 2);
      const double w = p - lo;
      warm.mu_ineq[fine.ineq_centrifugal(r, i)] =
          ratio * std::max(0.0, sol.mu_ineq[coarse.ineq_centrifugal(r, lo)] * (1.0 - w) +
                                    sol.mu_ineq[coarse.ineq_centrifugal(r, lo + 1)] * w);
    }
  }
  if (fine.runner_count() == 2) {
    warm.mu_ineq[fine.ineq_ordering()] = sol.mu_ineq[coarse.ineq_ordering()];
  }
  warm.penalty = std::min(std::max(sol.penalty_final, 10.0), 100.0);
  return warm;
}

SolverOptions coarse_options(const SolverOptions& opts) {
  SolverOptions c = opts;
  c.optimality_tol = std::max(opts.optimality_tol, 3e-4);
  c.max_inner_iter = std::min(opts.max_inner_iter, 500);
  c.max_outer_iter = std::min(opts.max_outer_iter, 25);
  c.log = nullptr;
  return c;
}

}  // namespace

SoloRace solve_solo(const Track& track, int lane, const RunnerParams& params, int n_nodes,
                    const SolverOptions& opts) {
  const auto ladder = grid_ladder(n_nodes, track.distance(), 0.0, false);

  SoloRace out;
  NlpSolution sol;
  std::optional<RaceNlp> prev;
  for (std::size_t level = 0; level < ladder.size(); ++level) {
    RaceNlp nlp = transcribe_single(track, lane, params, default_grid(track, ladder[level]));
    nlp.set_parallel(omp_get_level() == 0);
    std::vector<double> x0;
    SolverWarmStart warm;
    const SolverWarmStart* warm_ptr = nullptr;
    if (level == 0) {
      x0 = nlp.initial_guess(GuessStrategy::ConstantSpeed);
    } else {
      x0 = nlp.pack(resample_states(prev->unpack(sol.x, 0), ladder[level], track.distance()));
      warm = interpolate_warm_start(*prev, sol, nlp);
      warm_ptr = &warm;
    }
    sol = solve(nlp, x0, level + 1 == ladder.size() ? opts : coarse_options(opts), warm_ptr);
    prev = std::move(nlp);
  }

  const RaceNlp& nlp = *prev;
  out.states = nlp.unpack(sol.x, 0);
  out.time = out.states.y.back();
  out.status = sol.status;
  out.max_violation = sol.max_violation;
  out.kkt_residual = sol.kkt_residual;
  out.inner_iterations = sol.inner_iterations;

  std::vector<double> s(n_nodes);
  for (int i = 0; i < n_nodes; ++i) s[i] = nlp.grid().node(i);
  out.trajectory = make_trajectory(track, lane, params, s, out.states.y, out.states.z,
                                   out.states.e, out.states.f);
  out.trajectory.lane = lane;

  const auto sim = simulate_forward(track, lane, params, s, out.states.f, 4);
  out.oracle_gap = std::abs(sim.trajectory.final_time - out.time);
  return out;
}

int count_overtakings(std::span<const double> gap, double threshold) {
  int changes = 0, last = 0;
  for (double v : gap) {
    const int s = v > threshold ? 1 : (v < -threshold ? -1 : 0);
    if (s != 0) {
      if (last != 0 && s != last) ++changes;
      last = s;
    }
  }
  return changes;
}

PairSimResult simulate_pair_forward(const Track& track, std::array<int, 2> lanes,
                                    std::array<RunnerParams, 2> params,
                                    const InteractionConfig& cfg,
                                    std::span<const double> s_nodes, std::span<const double> f1,
                                    std::span<const double> f2, int refine) {
  const int n = static_cast<int>(s_nodes.size());
  if (n < 2 || f1.size() != s_nodes.size() || f2.size() != s_nodes.size() || refine < 1) {
    throw std::invalid_argument("simulate_pair_forward: inconsistent inputs");
  }
  const bool coupled = cfg.gamma > 0.0 && lateral_attenuation(lanes[0], lanes[1]) > 0.0;
  const double h = (s_nodes.back() - s_nodes.front()) / ((n - 1) * refine);
  const int n_fine = (n - 1) * refine;
  const int window = (coupled && cfg.eta > 0.0) ? static_cast<int>(std::round(cfg.eta / h)) : 0;

  auto force_at = [&](std::span<const double> f, double s) {
    const double pos = (s - s_nodes.front()) / (s_nodes.back() - s_nodes.front()) * (n - 1);
    const int lo = std::min(std::max(static_cast<int>(pos), 0), n - 2);
    const double w = std::min(std::max(pos - lo, 0.0), 1.0);
    return f[lo] * (1.0 - w) + f[lo + 1] * w;
  };

  std::array<double, 2> y{0.0, 0.0}, z{params[0].z0, params[1].z0},
      e{params[0].e0, params[1].e0};
  std::vector<double> logh_prefix(n_fine + 2, 0.0);
  double gap_prev = 0.0;
  {
    const double s0 = s_nodes.front();
    gap_prev = distance_gap(0.0, 0.0, 1.0 / z[0], 1.0 / z[1], track.angular_position(lanes[0], s0),
                            track.angular_position(lanes[1], s0), track.curvature(lanes[0], s0),
                            track.curvature(lanes[1], s0));
  }

  for (int k = 0; k < n_fine; ++k) {
    const double s = s_nodes.front() + h * k;
    double inhib = 1.0;
    if (window > 0 && k >= 1) {
      const int lo = std::max(k - window, 0);
      inhib = std::exp(logh_prefix[k + 1] - logh_prefix[lo + 1]);
    }

    auto rhs = [&](const std::array<double, 2>& ys, const std::array<double, 2>& zs,
                   const std::array<double, 2>& es, double sc, std::array<double, 2>& dy,
                   std::array<double, 2>& dz, std::array<double, 2>& de) {
      const double th1 = track.angular_position(lanes[0], sc);
      const double th2 = track.angular_position(lanes[1], sc);
      const double c1 = track.curvature(lanes[0], sc);
      const double c2 = track.curvature(lanes[1], sc);
      const double r = distance_gap(ys[0], ys[1], 1.0 / zs[0], 1.0 / zs[1], th1, th2, c1, c2);
      for (int i = 0; i < 2; ++i) {
        const double fr = force_at(i == 0 ? f1 : f2, sc);
        double fric = 1.0;
        if (coupled) {
          fric = 1.0 - inhib * interaction_strength(i == 0 ? r : -r, lanes[0], lanes[1], cfg);
        }
        dy[i] = zs[i];
        dz[i] = zs[i] * zs[i] / params[i].tau * fric - fr * zs[i] * zs[i] * zs[i];
        de[i] = sigma(es[i], params[i]) * zs[i] - fr;
      }
    };

    std::array<double, 2> k1y, k1z, k1e, k2y, k2z, k2e, k3y, k3z, k3e, k4y, k4z, k4e;
    std::array<double, 2> ty, tz, te;
    rhs(y, z, e, s, k1y, k1z, k1e);
    for (int i = 0; i < 2; ++i) {
      ty[i] = y[i] + 0.5 * h * k1y[i];
      tz[i] = z[i] + 0.5 * h * k1z[i];
      te[i] = e[i] + 0.5 * h * k1e[i];
    }
    rhs(ty, tz, te, s + 0.5 * h, k2y, k2z, k2e);
    for (int i = 0; i < 2; ++i) {
      ty[i] = y[i] + 0.5 * h * k2y[i];
      tz[i] = z[i] + 0.5 * h * k2z[i];
      te[i] = e[i] + 0.5 * h * k2e[i];
    }
    rhs(ty, tz, te, s + 0.5 * h, k3y, k3z, k3e);
    for (int i = 0; i < 2; ++i) {
      ty[i] = y[i] + h * k3y[i];
      tz[i] = z[i] + h * k3z[i];
      te[i] = e[i] + h * k3e[i];
    }
    rhs(ty, tz, te, s + h, k4y, k4z, k4e);
    for (int i = 0; i < 2; ++i) {
      y[i] += h / 6.0 * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
      z[i] += h / 6.0 * (k1z[i] + 2.0 * k2z[i] + 2.0 * k3z[i] + k4z[i]);
      e[i] += h / 6.0 * (k1e[i] + 2.0 * k2e[i] + 2.0 * k3e[i] + k4e[i]);
    }

    if (window > 0) {
      const double s_next = s_nodes.front() + h * (k + 1);
      const double gap_next = distance_gap(
          y[0], y[1], 1.0 / z[0], 1.0 / z[1], track.angular_position(lanes[0], s_next),
          track.angular_position(lanes[1], s_next), track.curvature(lanes[0], s_next),
          track.curvature(lanes[1], s_next));
      logh_prefix[k + 2] =
          logh_prefix[k + 1] + detail::overtake_log_factor(gap_prev, gap_next, cfg);
      gap_prev = gap_next;
    }
  }
  return {y[0], y[1]};
}

DuelRace solve_duel(const Track& track, std::array<int, 2> lanes,
                    std::array<RunnerParams, 2> params, const InteractionConfig& cfg,
                    int n_nodes, const SolverOptions& opts, double winner_weight,
                    const SoloRace& solo1, const SoloRace& solo2) {
  const bool needs_window = cfg.gamma > 0.0 && lateral_attenuation(lanes[0], lanes[1]) > 0.0;
  const auto ladder = grid_ladder(n_nodes, track.distance(), cfg.eta, needs_window);

  const GuessStrategy strategies[] = {GuessStrategy::ConstantSpeed, GuessStrategy::SoloSolution,
                                      GuessStrategy::PerturbedOvertakes};
  const WinnerBranch branches[] = {WinnerBranch::Runner1Wins, WinnerBranch::Runner2Wins};

  struct Attempt {
    NlpSolution sol;
    GuessStrategy strategy;
    WinnerBranch branch;
    bool feasible = false;
  };
  std::vector<Attempt> attempts;

  std::optional<RaceNlp> final_nlp;
  for (WinnerBranch branch : branches) {
    for (GuessStrategy strategy : strategies) {
      NlpSolution sol;
      std::optional<RaceNlp> prev;
      for (std::size_t level = 0; level < ladder.size(); ++level) {
        RaceNlp nlp = transcribe_pair(track, {lanes[0], lanes[1]}, {params[0], params[1]}, cfg,
                                      default_grid(track, ladder[level]), branch, winner_weight);
        nlp.set_parallel(omp_get_level() == 0);
        std::vector<double> x0;
        SolverWarmStart warm;
        const SolverWarmStart* warm_ptr = nullptr;
        if (level == 0) {
          const auto s1 = resample_states(solo1.states, ladder[level], track.distance());
          const auto s2 = resample_states(solo2.states, ladder[level], track.distance());
          x0 = nlp.initial_guess(strategy, &s1, &s2);
        } else {
          const auto s1 = resample_states(prev->unpack(sol.x, 0), ladder[level], track.distance());
          const auto s2 = resample_states(prev->unpack(sol.x, 1), ladder[level], track.distance());
          x0 = nlp.pack(s1, &s2);
          warm = interpolate_warm_start(*prev, sol, nlp);
          warm_ptr = &warm;
        }
        sol = solve(nlp, x0, level + 1 == ladder.size() ? opts : coarse_options(opts), warm_ptr);
        prev = std::move(nlp);
      }
      Attempt att;
      att.strategy = strategy;
      att.branch = branch;
      att.feasible = is_feasible(sol, opts);
      att.sol = std::move(sol);
      attempts.push_back(std::move(att));
      if (!final_nlp) final_nlp = std::move(prev);
    }
  }

  const Attempt* best = nullptr;
  for (const Attempt& att : attempts) {
    if (!att.feasible) continue;
    if (best == nullptr || att.sol.objective < best->sol.objective) best = &att;
  }
  if (best == nullptr) {
    throw std::runtime_error("duel solve failed: no feasible multi-start branch");
  }

  // Rebuild the winning branch's problem for unpacking.
  RaceNlp nlp = transcribe_pair(track, {lanes[0], lanes[1]}, {params[0], params[1]}, cfg,
                                default_grid(track, n_nodes), best->branch, winner_weight);
  nlp.set_parallel(omp_get_level() == 0);

  DuelRace out;
  out.lanes = lanes;
  out.strategy = best->strategy;
  out.branch = best->branch;
  out.status = best->sol.status;
  out.max_violation = best->sol.max_violation;
  out.objective = best->sol.objective;
  std::vector<double> s(n_nodes);
  for (int i = 0; i < n_nodes; ++i) s[i] = nlp.grid().node(i);
  for (int r = 0; r < 2; ++r) {
    const auto st = nlp.unpack(best->sol.x, r);
    out.times[r] = st.y.back();
    out.trajectories[r] =
        make_trajectory(track, lanes[r], params[r], s, st.y, st.z, st.e, st.f);
    out.trajectories[r].lane = lanes[r];
  }
  out.winner = out.times[0] <= out.times[1] ? 0 : 1;
  out.margin = std::abs(out.times[0] - out.times[1]);
  out.gap_profile = nlp.gap_profile(best->sol.x);
  out.inhibition_profile = nlp.inhibition_profile(best->sol.x);
  out.overtakings = count_overtakings(out.gap_profile);

  const auto f1 = nlp.unpack(best->sol.x, 0).f;
  const auto f2 = nlp.unpack(best->sol.x, 1).f;
  const auto sim = simulate_pair_forward(track, lanes, params, cfg, s, f1, f2, 4);
  out.oracle_gap = std::max(std::abs(sim.t1 - out.times[0]), std::abs(sim.t2 - out.times[1]));
  return out;
}

void RaceConfig::validate() const {
  if (runners.empty() || runners.size() > 2 || runners.size() != lanes.size()) {
    throw std::invalid_argument("config: need 1 or 2 runners with matching lanes");
  }
  for (int lane : lanes) {
    if (lane < 1 || lane > kNumLanes) throw std::invalid_argument("config: lane out of range");
  }
  if (runners.size() == 2 && lanes[0] == lanes[1]) {
    throw std::invalid_argument("config: lanes must be distinct in a pair race");
  }
  if (n_nodes < 2) throw std::invalid_argument("config: need at least 2 nodes");
  const bool known = experiment == "race" || experiment == "tracks" || experiment == "meanlane" ||
                     experiment == "adjacent";
  if (!known) throw std::invalid_argument("config: unknown experiment " + experiment);
}

RaceConfig RaceConfig::from_json(const nlohmann::json& doc) {
  RaceConfig cfg;
  cfg.experiment = doc.value("experiment", cfg.experiment);
  if (doc.contains("track")) {
    cfg.track = Track::from_json(doc.at("track"));
    cfg.track_name = doc.at("track").is_string() ? doc.at("track").get<std::string>()
                                                 : cfg.track.name();
  }
  if (doc.contains("runners")) {
    cfg.runners.clear();
    cfg.runner_names.clear();
    cfg.lanes.clear();
    for (const auto& r : doc.at("runners")) {
      if (r.is_string()) {
        cfg.runner_names.push_back(r.get<std::string>());
        cfg.runners.push_back(RunnerParams::preset(r.get<std::string>()));
        cfg.lanes.push_back(static_cast<int>(cfg.lanes.size()) + 1);
      } else {
        cfg.runners.push_back(RunnerParams::from_json(r));
        cfg.runner_names.push_back(r.value("preset", std::string("custom")));
        cfg.lanes.push_back(r.value("lane", static_cast<int>(cfg.lanes.size()) + 1));
      }
    }
  }
  if (doc.contains("lanes")) {
    cfg.lanes = doc.at("lanes").get<std::vector<int>>();
  }
  if (doc.contains("interaction")) {
    cfg.interaction = InteractionConfig::from_json(doc.at("interaction"));
  }
  cfg.n_nodes = doc.value("nodes", cfg.n_nodes);
  cfg.winner_weight = doc.value("winner_weight", cfg.winner_weight);
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  if (doc.contains("tracks")) cfg.tracks = doc.at("tracks").get<std::vector<std::string>>();
  if (doc.contains("compare_lanes")) {
    cfg.compare_lanes = doc.at("compare_lanes").get<std::vector<int>>();
  }
  if (doc.contains("solver")) {
    const auto& s = doc.at("solver");
    cfg.solver.feasibility_tol = s.value("feasibility_tol", cfg.solver.feasibility_tol);
    cfg.solver.optimality_tol = s.value("optimality_tol", cfg.solver.optimality_tol);
    cfg.solver.max_outer_iter = s.value("max_outer_iter", cfg.solver.max_outer_iter);
    cfg.solver.max_inner_iter = s.value("max_inner_iter", cfg.solver.max_inner_iter);
    cfg.solver.penalty_init = s.value("penalty_init", cfg.solver.penalty_init);
    cfg.solver.penalty_growth = s.value("penalty_growth", cfg.solver.penalty_growth);
    cfg.solver.lbfgs_memory = s.value("lbfgs_memory", cfg.solver.lbfgs_memory);
    cfg.solver.fd_check = s.value("fd_check", cfg.solver.fd_check);
  }
  cfg.validate();
  return cfg;
}

namespace {

nlohmann::json solo_to_json(const SoloRace& solo, int lane, const std::string& runner) {
  nlohmann::json j;
  j["runner"] = runner;
  j["lane"] = lane;
  j["time"] = solo.time;
  j["splits"] = solo.trajectory.splits;
  j["anaerobic_fraction"] = solo.trajectory.anaerobic_fraction;
  j["oracle_gap"] = solo.oracle_gap;
  j["solver"] = {{"status", static_cast<int>(solo.status)},
                 {"max_violation", solo.max_violation},
                 {"kkt_residual", solo.kkt_residual},
                 {"inner_iterations", solo.inner_iterations}};
  return j;
}

std::string trajectory_filename(const std::string& dir, int lane, const std::string& runner) {
  return dir + "/race_lane" + std::to_string(lane) + "_" + runner + ".csv";
}

}  // namespace

RaceOutcome run_race(const RaceConfig& cfg) {
  cfg.validate();
  RaceOutcome outcome;
  const bool write = !cfg.out_dir.empty();
  if (write) std::filesystem::create_directories(cfg.out_dir);

  for (std::size_t i = 0; i < cfg.runners.size(); ++i) {
    outcome.solos.push_back(
        solve_solo(cfg.track, cfg.lanes[i], cfg.runners[i], cfg.n_nodes, cfg.solver));
  }

  nlohmann::json summary;
  summary["track"] = cfg.track_name;
  summary["nodes"] = cfg.n_nodes;

  if (cfg.runners.size() == 1) {
    const SoloRace& solo = outcome.solos[0];
    summary["runners"] = {solo_to_json(solo, cfg.lanes[0], cfg.runner_names[0])};
    if (write) {
      write_trajectory_csv(trajectory_filename(cfg.out_dir, cfg.lanes[0], cfg.runner_names[0]),
                           solo.trajectory);
    }
  } else {
    DuelRace duel = solve_duel(cfg.track, {cfg.lanes[0], cfg.lanes[1]},
                               {cfg.runners[0], cfg.runners[1]}, cfg.interaction, cfg.n_nodes,
                               cfg.solver, cfg.winner_weight, outcome.solos[0], outcome.solos[1]);
    summary["interaction"] = {{"gamma", cfg.interaction.gamma}, {"eta", cfg.interaction.eta}};
    summary["winner_lane"] = cfg.lanes[duel.winner];
    summary["margin"] = duel.margin;
    summary["overtakings"] = duel.overtakings;
    summary["oracle_gap"] = duel.oracle_gap;
    summary["objective"] = duel.objective;
    summary["times"] = {duel.times[0], duel.times[1]};
    nlohmann::json runners = nlohmann::json::array();
    for (int r = 0; r < 2; ++r) {
      nlohmann::json j;
      j["runner"] = cfg.runner_names[r];
      j["lane"] = cfg.lanes[r];
      j["time"] = duel.times[r];
      j["solo_time"] = outcome.solos[r].time;
      j["gain_vs_solo"] = outcome.solos[r].time - duel.times[r];
      j["splits"] = duel.trajectories[r].splits;
      j["anaerobic_fraction"] = duel.trajectories[r].anaerobic_fraction;
      runners.push_back(j);
      if (write) {
        write_trajectory_csv(trajectory_filename(cfg.out_dir, cfg.lanes[r], cfg.runner_names[r]),
                             duel.trajectories[r]);
      }
    }
    summary["runners"] = runners;
    outcome.duel = std::move(duel);
  }

  if (write) write_json_file(cfg.out_dir + "/race_summary.json", summary);
  return outcome;
}

std::vector<TracksCell> compare_tracks(const RaceConfig& cfg) {
  struct Job {
    std::string runner, track;
    int lane;
  };
  std::vector<Job> jobs;
  for (const auto& runner : cfg.runner_names) {
    for (const auto& track : cfg.tracks) {
      for (int lane : cfg.compare_lanes) jobs.push_back({runner, track, lane});
    }
  }
  std::vector<TracksCell> cells(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const Track track = Track::preset(jobs[j].track);
    const RunnerParams params = RunnerParams::preset(jobs[j].runner);
    const SoloRace solo = solve_solo(track, jobs[j].lane, params, cfg.n_nodes, cfg.solver);
    cells[j] = {jobs[j].runner, jobs[j].track, jobs[j].lane, solo.time, solo.status};
  }
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cells) {
      rows.push_back({c.runner, c.track, std::to_string(c.lane), format_number(c.time)});
    }
    write_csv(cfg.out_dir + "/tracks_times.csv", {"runner", "track", "lane", "time"}, rows);
  }
  return cells;
}

MeanLaneResult mean_time_per_lane(const RaceConfig& cfg) {
  const RunnerParams params = cfg.runners.front();
  MeanLaneResult result;

  std::array<SoloRace, 8> solos;
#pragma omp parallel for schedule(dynamic)
  for (int lane = 1; lane <= 8; ++lane) {
    solos[lane - 1] = solve_solo(cfg.track, lane, params, cfg.n_nodes, cfg.solver);
  }
  for (int lane = 1; lane <= 8; ++lane) result.solo_time[lane - 1] = solos[lane - 1].time;

  std::vector<MeanLanePair> pairs;
  for (int a = 1; a <= 8; ++a) {
    for (int b = a + 1; b <= 8; ++b) pairs.push_back({a, b});
  }
#pragma omp parallel for schedule(dynamic)
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    MeanLanePair& pr = pairs[p];
    pr.interacting =
        cfg.interaction.gamma > 0.0 && lateral_attenuation(pr.lane_a, pr.lane_b) > 0.0;
    if (!pr.interacting) {
      // The coupling term vanishes identically, so the duel separates into the
      // two solo problems.
      pr.time_a = solos[pr.lane_a - 1].time;
      pr.time_b = solos[pr.lane_b - 1].time;
      pr.winner_time = std::min(pr.time_a, pr.time_b);
      pr.winner_lane = pr.time_a <= pr.time_b ? pr.lane_a : pr.lane_b;
      pr.overtakings = 0;
    } else {
      const DuelRace duel =
          solve_duel(cfg.track, {pr.lane_a, pr.lane_b}, {params, params}, cfg.interaction,
                     cfg.n_nodes, cfg.solver, cfg.winner_weight, solos[pr.lane_a - 1],
                     solos[pr.lane_b - 1]);
      pr.time_a = duel.times[0];
      pr.time_b = duel.times[1];
      pr.winner_time = duel.times[duel.winner];
      pr.winner_lane = duel.lanes[duel.winner];
      pr.overtakings = duel.overtakings;
    }
  }
  result.pairs = pairs;

  for (int lane = 1; lane <= 8; ++lane) {
    double sum_winner = 0.0, sum_own = 0.0;
    for (const auto& pr : pairs) {
      if (pr.lane_a != lane && pr.lane_b != lane) continue;
      sum_winner += pr.winner_time;
      sum_own += pr.lane_a == lane ? pr.time_a : pr.time_b;
    }
    result.mean_time[lane - 1] = sum_winner / 7.0;
    result.mean_own_time[lane - 1] = sum_own / 7.0;
  }
  result.ranking.resize(8);
  std::iota(result.ranking.begin(), result.ranking.end(), 1);
  std::sort(result.ranking.begin(), result.ranking.end(),
            [&](int a, int b) { return result.mean_time[a - 1] < result.mean_time[b - 1]; });

  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::vector<std::string>> rows;
    for (int lane = 1; lane <= 8; ++lane) {
      rows.push_back({std::to_string(lane), format_number(result.mean_time[lane - 1]),
                      format_number(result.mean_own_time[lane - 1]),
                      format_number(result.solo_time[lane - 1])});
    }
    write_csv(cfg.out_dir + "/mean_times.csv", {"lane", "mean_winner_time", "mean_own_time", "solo_time"},
              rows);
    // all 56 ordered pairs, mirrored from the 28 solved races
    std::vector<std::vector<std::string>> prow;
    for (const auto& pr : pairs) {
      prow.push_back({std::to_string(pr.lane_a), std::to_string(pr.lane_b),
                      format_number(pr.winner_time), format_number(pr.time_a),
                      std::to_string(pr.winner_lane), std::to_string(pr.overtakings)});
      prow.push_back({std::to_string(pr.lane_b), std::to_string(pr.lane_a),
                      format_number(pr.winner_time), format_number(pr.time_b),
                      std::to_string(pr.winner_lane), std::to_string(pr.overtakings)});
    }
    write_csv(cfg.out_dir + "/mean_lane_pairs.csv",
              {"lane", "other_lane", "winner_time", "own_time", "winner_lane", "overtakings"},
              prow);
  }
  return result;
}

std::vector<AdjacentRow> adjacent_lane_study(const RaceConfig& cfg) {
  const RunnerParams params = cfg.runners.front();
  std::array<SoloRace, 8> solos;
#pragma omp parallel for schedule(dynamic)
  for (int lane = 1; lane <= 8; ++lane) {
    solos[lane - 1] = solve_solo(cfg.track, lane, params, cfg.n_nodes, cfg.solver);
  }

  std::vector<AdjacentRow> rows(7);
#pragma omp parallel for schedule(dynamic)
  for (int k = 2; k <= 8; ++k) {
    const DuelRace duel =
        solve_duel(cfg.track, {k, k - 1}, {params, params}, cfg.interaction, cfg.n_nodes,
                   cfg.solver, cfg.winner_weight, solos[k - 1], solos[k - 2]);
    AdjacentRow row;
    row.lane = k;
    row.solo_time = solos[k - 1].time;
    row.duel_time = duel.times[0];  // runner 0 is the lane-k runner
    row.gain = row.solo_time - row.duel_time;
    row.winner_time = duel.times[duel.winner];
    row.winner_lane = duel.lanes[duel.winner];
    row.overtakings = duel.overtakings;
    rows[k - 2] = row;
  }
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    std::vector<std::vector<std::string>> csv;
    for (const auto& r : rows) {
      csv.push_back({std::to_string(r.lane), format_number(r.solo_time),
                     format_number(r.duel_time), format_number(r.gain),
                     format_number(r.winner_time), std::to_string(r.winner_lane),
                     std::to_string(r.overtakings)});
    }
    write_csv(cfg.out_dir + "/adjacent_lanes.csv",
              {"lane", "solo_time", "duel_time", "gain", "winner_time", "winner_lane",
               "overtakings"},
              csv);
  }
  return rows;
}

}  // namespace trackpace
