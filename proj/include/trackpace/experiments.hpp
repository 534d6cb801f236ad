#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "trackpace/interaction.hpp"
#include "trackpace/runner.hpp"
#include "trackpace/solver.hpp"
#include "trackpace/track.hpp"
#include "trackpace/trajectory.hpp"
#include "trackpace/transcription.hpp"

namespace trackpace {

/// Solver settings tuned for the race problems: feasibility drives the times,
/// and the first-order polish below 1e-4 does not move them anymore.
SolverOptions experiment_solver_options();

struct RaceConfig {
  std::string experiment = "race";  // race | tracks | meanlane | adjacent
  std::string track_name = "STD";
  Track track = Track::preset("STD");
  std::vector<std::string> runner_names = {"A1"};
  std::vector<RunnerParams> runners = {RunnerParams::preset("A1")};
  std::vector<int> lanes = {1};
  InteractionConfig interaction;
  int n_nodes = 1001;
  SolverOptions solver = experiment_solver_options();
  double winner_weight = kDefaultWinnerWeight;
  std::string out_dir;  // empty: no files written
  std::vector<std::string> tracks = Track::preset_names();  // tracks experiment
  std::vector<int> compare_lanes = {1, 8};                  // tracks experiment

  void validate() const;
  static RaceConfig from_json(const nlohmann::json& doc);
};

struct SoloRace {
  double time = 0.0;
  Trajectory trajectory;
  RaceNlp::RunnerStates states;
  SolveStatus status = SolveStatus::MaxIter;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
  int inner_iterations = 0;
  double oracle_gap = 0.0;  // |T from re-integration - T from the program|
};

struct DuelRace {
  std::array<int, 2> lanes{1, 2};
  std::array<double, 2> times{};
  std::array<Trajectory, 2> trajectories;
  int winner = 0;  // index of the faster runner
  double margin = 0.0;
  int overtakings = 0;
  GuessStrategy strategy = GuessStrategy::SoloSolution;
  WinnerBranch branch = WinnerBranch::Runner1Wins;
  SolveStatus status = SolveStatus::MaxIter;
  double max_violation = 0.0;
  double objective = 0.0;
  double oracle_gap = 0.0;
  std::vector<double> gap_profile;
  std::vector<double> inhibition_profile;
};

SoloRace solve_solo(const Track& track, int lane, const RunnerParams& params, int n_nodes,
                    const SolverOptions& opts);

/// Multi-start duel: three guess strategies times two winner branches, each
/// refined through the grid ladder; the best feasible objective wins.
DuelRace solve_duel(const Track& track, std::array<int, 2> lanes,
                    std::array<RunnerParams, 2> params, const InteractionConfig& cfg,
                    int n_nodes, const SolverOptions& opts, double winner_weight,
                    const SoloRace& solo1, const SoloRace& solo2);

struct PairSimResult {
  double t1 = 0.0;
  double t2 = 0.0;
};

/// Re-integrates both runners' equations of motion with the coupling active,
/// on a grid `refine` times finer than the given force profiles.
PairSimResult simulate_pair_forward(const Track& track, std::array<int, 2> lanes,
                                    std::array<RunnerParams, 2> params,
                                    const InteractionConfig& cfg,
                                    std::span<const double> s_nodes, std::span<const double> f1,
                                    std::span<const double> f2, int refine = 4);

/// Sign changes of the node-sampled gap, ignoring dwell inside |r| <= threshold.
int count_overtakings(std::span<const double> gap, double threshold = 0.01);

struct RaceOutcome {
  std::vector<SoloRace> solos;          // one per runner
  std::optional<DuelRace> duel;         // present for two-runner races
};

RaceOutcome run_race(const RaceConfig& cfg);

struct TracksCell {
  std::string runner;
  std::string track;
  int lane = 1;
  double time = 0.0;
  SolveStatus status = SolveStatus::MaxIter;
};

std::vector<TracksCell> compare_tracks(const RaceConfig& cfg);

struct MeanLanePair {
  int lane_a = 0, lane_b = 0;
  double winner_time = 0.0;
  double time_a = 0.0, time_b = 0.0;
  int winner_lane = 0;
  int overtakings = 0;
  bool interacting = false;
};

struct MeanLaneResult {
  std::array<double, 8> mean_time{};       // paper's winner-time average
  std::array<double, 8> mean_own_time{};   // same average over the lane's own time
  std::array<double, 8> solo_time{};
  std::vector<int> ranking;                // lanes sorted by mean_time
  std::vector<MeanLanePair> pairs;         // unordered pairs (a < b)
};

MeanLaneResult mean_time_per_lane(const RaceConfig& cfg);

struct AdjacentRow {
  int lane = 0;                    // k, racing against k-1
  double solo_time = 0.0;          // lane-k alone
  double duel_time = 0.0;          // lane-k's time in the duel
  double gain = 0.0;               // solo - duel
  double winner_time = 0.0;
  int winner_lane = 0;
  int overtakings = 0;
};

std::vector<AdjacentRow> adjacent_lane_study(const RaceConfig& cfg);

}  // namespace trackpace
