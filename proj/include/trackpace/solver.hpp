#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "trackpace/nlp.hpp"

namespace trackpace {

struct SolverOptions {
  double feasibility_tol = 1e-6;
  double optimality_tol = 1e-6;
  int max_outer_iter = 50;
  int max_inner_iter = 500;
  double penalty_init = 10.0;
  double penalty_growth = 10.0;
  bool fd_check = false;       // verify derivatives at x0 before solving
  int lbfgs_memory = 30;
  std::ostream* log = nullptr;  // optional iteration log
};

enum class SolveStatus { Converged, MaxIter, Infeasible };

struct OuterIterate {
  int iter = 0;
  double merit = 0.0;
  double violation = 0.0;
  double penalty = 0.0;
  double kkt = 0.0;
  int inner_iterations = 0;
};

struct NlpSolution {
  std::vector<double> x;
  double objective = 0.0;
  double max_violation = 0.0;
  double kkt_residual = 0.0;
  int outer_iterations = 0;
  int inner_iterations = 0;
  SolveStatus status = SolveStatus::MaxIter;
  std::vector<OuterIterate> history;
  std::vector<double> lambda_eq, mu_ineq;  // final multiplier estimates
  double penalty_final = 0.0;
};

/// Multiplier estimates carried between related solves (e.g. grid refinement).
struct SolverWarmStart {
  std::vector<double> lambda_eq, mu_ineq;
  double penalty = 0.0;
};

/// Augmented-Lagrangian loop around a projected L-BFGS inner solver. Bound
/// constraints are handled by projection, general constraints through
/// multiplier estimates with penalty growth when feasibility stalls.
/// Deterministic: the same problem, start and options give identical iterates.
NlpSolution solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& opts = {});
NlpSolution solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& opts, const SolverWarmStart* warm);

/// Compares the analytic Jacobian and objective gradient against central
/// finite differences (step scaled by 1 + |x_j|); returns the worst relative
/// mismatch.
double gradient_check(const NlpProblem& problem, std::span<const double> x,
                      double fd_step = 1e-6);

}  // namespace trackpace
