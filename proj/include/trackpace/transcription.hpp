#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "trackpace/interaction.hpp"
#include "trackpace/nlp.hpp"
#include "trackpace/runner.hpp"
#include "trackpace/track.hpp"

namespace trackpace {

struct Grid {
  int n_nodes = 1001;
  double length = 200.0;
  double h = 0.2;

  static Grid uniform(double length, int n_nodes);
  double node(int i) const { return length * i / (n_nodes - 1); }
};

enum class GuessStrategy { ConstantSpeed, SoloSolution, PerturbedOvertakes };
enum class WinnerBranch { Runner1Wins, Runner2Wins };

inline constexpr double kDefaultWinnerWeight = 5e-4;

/// Direct transcription of the pacing problem on a uniform distance grid:
/// trapezoidal defects for (y, z, e), force integrated from the rate control,
/// the force-circle constraint at every node, and for two runners the delayed
/// inhibition coupling with the window entering as a pure index range.
///
/// The decision vector is scaled so all entries are O(1); constraint rows are
/// scaled likewise. Construction is pure; evaluation reuses internal scratch,
/// so a single instance must not be evaluated from two threads at once
/// (independent solves build independent instances).
class RaceNlp final : public NlpProblem {
 public:
  struct RunnerStates {
    std::vector<double> y, z, e, f, u;
  };

  int num_vars() const override { return static_cast<int>(lower_.size()); }
  int num_eq() const override { return runner_count_ * 4 * (n_ - 1); }
  int num_ineq() const override { return runner_count_ * n_ + (runner_count_ == 2 ? 1 : 0); }
  const std::vector<double>& lower_bounds() const override { return lower_; }
  const std::vector<double>& upper_bounds() const override { return upper_; }

  double objective(std::span<const double> x) const override;
  void objective_gradient(std::span<const double> x, std::span<double> grad) const override;
  void constraints(std::span<const double> x, std::span<double> c_eq,
                   std::span<double> c_ineq) const override;
  void add_weighted_constraint_gradient(std::span<const double> x, std::span<const double> w_eq,
                                        std::span<const double> w_ineq,
                                        std::span<double> grad) const override;
  std::vector<std::vector<int>> jacobian_sparsity() const override;
  CurvatureSketch curvature_sketch(std::span<const double> x) const override;

  /// Straightforward serial evaluation of the same residuals, kept as the
  /// reference the optimized kernels are tested and benchmarked against.
  void constraints_reference(std::span<const double> x, std::span<double> c_eq,
                             std::span<double> c_ineq) const;

  /// Use OpenMP in the evaluation kernels (identical results either way).
  void set_parallel(bool on) { parallel_ = on; }
  bool parallel() const { return parallel_; }

  int runner_count() const { return runner_count_; }
  const Grid& grid() const { return grid_; }
  const Track& track() const { return *track_; }
  int lane(int runner) const { return lanes_[runner]; }
  const RunnerParams& params(int runner) const { return params_[runner]; }
  WinnerBranch branch() const { return branch_; }

  // Variable and row indices (runner is 0-based).
  int var_y(int runner, int i) const { return runner * vars_per_runner_ + i; }
  int var_z(int runner, int i) const { return runner * vars_per_runner_ + n_ + i; }
  int var_e(int runner, int i) const { return runner * vars_per_runner_ + 2 * n_ + i; }
  int var_f(int runner, int i) const { return runner * vars_per_runner_ + 3 * n_ + i; }
  int var_u(int runner, int i) const { return runner * vars_per_runner_ + 4 * n_ + i; }
  int row_yd(int runner, int i) const { return runner * 4 * (n_ - 1) + i; }
  int row_zd(int runner, int i) const { return runner * 4 * (n_ - 1) + (n_ - 1) + i; }
  int row_ed(int runner, int i) const { return runner * 4 * (n_ - 1) + 2 * (n_ - 1) + i; }
  int row_fl(int runner, int i) const { return runner * 4 * (n_ - 1) + 3 * (n_ - 1) + i; }
  int ineq_centrifugal(int runner, int i) const { return runner * n_ + i; }
  int ineq_ordering() const { return runner_count_ * n_; }

  std::vector<double> initial_guess(GuessStrategy strategy,
                                    const RunnerStates* solo1 = nullptr,
                                    const RunnerStates* solo2 = nullptr) const;

  RunnerStates unpack(std::span<const double> x, int runner) const;
  std::vector<double> pack(const RunnerStates& r1, const RunnerStates* r2 = nullptr) const;

  double final_time(std::span<const double> x, int runner) const;

  /// Node-sampled gap r(s) between the two runners (pair problems).
  std::vector<double> gap_profile(std::span<const double> x) const;
  /// Node-sampled inhibition indicator (1s when the window is off).
  std::vector<double> inhibition_profile(std::span<const double> x) const;

  friend RaceNlp transcribe_single(const Track&, int lane, const RunnerParams&, const Grid&);
  friend RaceNlp transcribe_pair(const Track&, std::pair<int, int> lanes,
                                 std::pair<RunnerParams, RunnerParams> params,
                                 const InteractionConfig&, const Grid&, WinnerBranch, double);

 private:
  RaceNlp() = default;
  void setup(const Track& track);
  void eval_states(std::span<const double> x) const;
  void eval_coupling() const;  // gap, interaction and inhibition arrays
  void eval_rhs() const;

  std::shared_ptr<const Track> track_;
  Grid grid_;
  int n_ = 0;
  int runner_count_ = 1;
  int vars_per_runner_ = 0;
  std::array<int, 2> lanes_{1, 1};
  std::array<RunnerParams, 2> params_{};
  InteractionConfig cfg_{};
  WinnerBranch branch_ = WinnerBranch::Runner1Wins;
  double winner_weight_ = kDefaultWinnerWeight;
  bool coupled_ = false;  // gamma > 0 and lanes close enough
  int window_ = 0;        // eta / h in nodes, 0 when no inhibition
  bool parallel_ = true;

  std::vector<double> lower_, upper_;
  // Variable scales (physical = scale * decision value), chosen together with
  // the row scales so every constraint row has O(1) entries in decision space.
  double sy_ = 1.0, sz_ = 1.0, se_ = 1.0;
  std::array<double, 2> sf_{1.0, 1.0};
  std::array<double, 2> rho_y_{}, rho_z_{}, rho_e_{}, rho_f_{}, rho_c_{};  // row scales
  std::vector<double> curv_, theta_;             // per runner*node

  // Evaluation scratch (sized at construction).
  mutable std::vector<double> ys_, zs_, es_, fs_, us_;       // physical states
  mutable std::vector<double> rhs_z_, rhs_e_;
  mutable std::vector<double> gap_, fint_, dfint_, inhib_;   // r, F(+-r), F'(+-r), I
  mutable std::vector<double> logh_, dlogh_prev_, dlogh_cur_, logh_prefix_;
  mutable std::vector<double> awin_, awin_prefix_, gap_grad_;
};

Grid default_grid(const Track& track, int n_nodes = 1001);

RaceNlp transcribe_single(const Track& track, int lane, const RunnerParams& params,
                          const Grid& grid);

RaceNlp transcribe_pair(const Track& track, std::pair<int, int> lanes,
                        std::pair<RunnerParams, RunnerParams> params,
                        const InteractionConfig& cfg, const Grid& grid, WinnerBranch branch,
                        double winner_weight = kDefaultWinnerWeight);

}  // namespace trackpace
