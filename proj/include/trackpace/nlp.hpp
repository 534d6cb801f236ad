#pragma once

#include <span>
#include <vector>

namespace trackpace {

/// A smooth nonlinear program over box-bounded variables:
///   min f(x)  s.t.  c_eq(x) = 0, c_ineq(x) <= 0, lower <= x <= upper.
/// Implementations provide analytic derivatives through the weighted-gradient
/// form, which is all the solver needs; full Jacobian rows for checking are
/// derived from it.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual const std::vector<double>& lower_bounds() const = 0;
  virtual const std::vector<double>& upper_bounds() const = 0;

  virtual double objective(std::span<const double> x) const = 0;
  virtual void objective_gradient(std::span<const double> x, std::span<double> grad) const = 0;

  virtual void constraints(std::span<const double> x, std::span<double> c_eq,
                           std::span<double> c_ineq) const = 0;

  /// grad += J_eq^T w_eq + J_ineq^T w_ineq.
  virtual void add_weighted_constraint_gradient(std::span<const double> x,
                                                std::span<const double> w_eq,
                                                std::span<const double> w_ineq,
                                                std::span<double> grad) const = 0;

  /// Structural nonzero columns of each constraint row (equalities first,
  /// then inequalities), sorted ascending.
  virtual std::vector<std::vector<int>> jacobian_sparsity() const = 0;

  /// Dense Jacobian row (equality rows first), computed through the weighted
  /// gradient with a unit weight. `row_out` must be zero on entry.
  void jacobian_row(std::span<const double> x, int row, std::span<double> row_out) const;

  /// Optional curvature sketch for preconditioning. Each chain lists variable
  /// indices whose constraint rows act like nearest-neighbor differences (a
  /// tridiagonal Laplacian block); `extra_diag` adds per-variable weight from
  /// any remaining rows. Empty chains mean no preconditioning.
  struct CurvatureSketch {
    std::vector<std::vector<int>> chains;
    std::vector<double> extra_diag;
  };
  virtual CurvatureSketch curvature_sketch(std::span<const double> x) const {
    (void)x;
    return {};
  }
};

}  // namespace trackpace
