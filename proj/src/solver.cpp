#include "trackpace/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace trackpace {

void NlpProblem::jacobian_row(std::span<const double> x, int row, std::span<double> row_out) const {
  std::vector<double> w_eq(num_eq(), 0.0), w_ineq(num_ineq(), 0.0);
  if (row < num_eq()) {
    w_eq[row] = 1.0;
  } else {
    w_ineq[row - num_eq()] = 1.0;
  }
  add_weighted_constraint_gradient(x, w_eq, w_ineq, row_out);
}

namespace {

double inf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void project(std::span<double> x, std::span<const double> lo, std::span<const double> hi) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::min(std::max(x[i], lo[i]), hi[i]);
}

// Augmented Lagrangian merit pieces for one multiplier/penalty setting.
struct Merit {
  const NlpProblem* problem;
  std::span<const double> lambda;  // equality multipliers
  std::span<const double> mu;      // inequality multipliers (>= 0)
  double rho;

  mutable std::vector<double> ceq, cineq;
  mutable long value_evals = 0;
  mutable long grad_evals = 0;

  double value(std::span<const double> x) const {
    ++value_evals;
    ceq.resize(problem->num_eq());
    cineq.resize(problem->num_ineq());
    problem->constraints(x, ceq, cineq);
    double phi = problem->objective(x);
    for (int j = 0; j < problem->num_eq(); ++j) {
      phi += lambda[j] * ceq[j] + 0.5 * rho * ceq[j] * ceq[j];
    }
    for (int j = 0; j < problem->num_ineq(); ++j) {
      const double t = mu[j] + rho * cineq[j];
      if (t > 0.0) phi += (t * t - mu[j] * mu[j]) / (2.0 * rho);
      else phi += -mu[j] * mu[j] / (2.0 * rho);
    }
    return phi;
  }

  void gradient(std::span<const double> x, std::span<double> grad) const {
    ++grad_evals;
    ceq.resize(problem->num_eq());
    cineq.resize(problem->num_ineq());
    problem->constraints(x, ceq, cineq);
    std::vector<double> w_eq(problem->num_eq()), w_ineq(problem->num_ineq());
    for (int j = 0; j < problem->num_eq(); ++j) w_eq[j] = lambda[j] + rho * ceq[j];
    for (int j = 0; j < problem->num_ineq(); ++j) w_ineq[j] = std::max(0.0, mu[j] + rho * cineq[j]);
    problem->objective_gradient(x, grad);
    problem->add_weighted_constraint_gradient(x, w_eq, w_ineq, grad);
  }
};

// Tridiagonal model of the augmented-Lagrangian curvature: defect rows make
// each state chain a Laplacian, everything else enters as extra diagonal.
// Solving it per iteration removes the grid-length conditioning of the chains.
struct ChainPreconditioner {
  NlpProblem::CurvatureSketch sketch;
  double rho = 1.0;
  bool active = false;
  std::vector<double> diag, sub;      // factorized in place per apply
  std::vector<double> fallback_diag;  // vars outside every chain

  void setup(const NlpProblem& problem, std::span<const double> x, double rho_in) {
    sketch = problem.curvature_sketch(x);
    active = !sketch.chains.empty();
    if (!active) return;
    rho = std::max(rho_in, 1.0);
    fallback_diag.assign(problem.num_vars(), 0.0);
    for (int v = 0; v < problem.num_vars(); ++v) {
      fallback_diag[v] = std::max(sketch.extra_diag.empty() ? 0.0 : sketch.extra_diag[v], 0.05);
    }
  }

  // dir := M^{-1} dir with M = rho * (chain Laplacian + extra diag), where
  // masked coordinates are decoupled.
  void apply(std::span<double> dir, std::span<const double> mask) { apply_scaled(dir, mask, rho); }

  void apply_scaled(std::span<double> dir, std::span<const double> mask, double rho_use) {
    std::vector<char> in_chain(dir.size(), 0);
    for (const auto& chain : sketch.chains) {
      const std::size_t m = chain.size();
      if (m == 0) continue;
      diag.resize(m);
      sub.resize(m);
      std::vector<double> rhs(m);
      for (std::size_t i = 0; i < m; ++i) {
        const int v = chain[i];
        in_chain[v] = 1;
        const bool fixed = mask[v] == 0.0;
        const double incident = (i == 0 || i + 1 == m) ? 1.0 : 2.0;
        diag[i] = fixed ? 1.0 : incident + (sketch.extra_diag.empty() ? 0.0 : sketch.extra_diag[v]) + 1e-3;
        sub[i] = 0.0;
        rhs[i] = fixed ? 0.0 : dir[v];
      }
      for (std::size_t i = 1; i < m; ++i) {
        const bool link = mask[chain[i]] != 0.0 && mask[chain[i - 1]] != 0.0;
        sub[i] = link ? -1.0 : 0.0;
      }
      // Thomas elimination
      for (std::size_t i = 1; i < m; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sub[i];
        rhs[i] -= w * rhs[i - 1];
      }
      rhs[m - 1] /= diag[m - 1];
      for (std::size_t i = m - 1; i-- > 0;) {
        rhs[i] = (rhs[i] - sub[i + 1] * rhs[i + 1]) / diag[i];
      }
      for (std::size_t i = 0; i < m; ++i) {
        const int v = chain[i];
        dir[v] = mask[v] == 0.0 ? 0.0 : rhs[i] / rho_use;
      }
    }
    for (std::size_t v = 0; v < dir.size(); ++v) {
      if (!in_chain[v]) dir[v] = mask[v] * dir[v] / (rho_use * fallback_diag[v]);
    }
  }
};

double precond_stationarity(ChainPreconditioner& precond, std::span<const double> grad,
                            std::span<const double> mask) {
  const std::size_t n = grad.size();
  std::vector<double> tmp(n);
  // Penalty-free metric: stationarity must not look better just because the
  // penalty grew.
  for (std::size_t i = 0; i < n; ++i) tmp[i] = grad[i] * mask[i];
  precond.apply_scaled(tmp, mask, 1.0);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += tmp[i] * grad[i] * mask[i];
  return std::sqrt(std::max(acc, 0.0));
}

struct LbfgsMemory {
  std::deque<std::vector<double>> s, y;
  std::deque<double> rho_sy;
  int capacity = 12;

  void clear() { s.clear(); y.clear(); rho_sy.clear(); }

  void push(std::vector<double> snew, std::vector<double> ynew) {
    const double sy = dot(snew, ynew);
    const double sn = std::sqrt(dot(snew, snew));
    const double yn = std::sqrt(dot(ynew, ynew));
    if (!(sy > 1e-10 * sn * yn)) return;  // skip non-curvature pairs
    s.push_back(std::move(snew));
    y.push_back(std::move(ynew));
    rho_sy.push_back(1.0 / sy);
    if (static_cast<int>(s.size()) > capacity) {
      s.pop_front();
      y.pop_front();
      rho_sy.pop_front();
    }
  }

  // Two-loop recursion restricted to the free variables (mask = 1), seeded by
  // the chain preconditioner when one is available.
  void apply(std::span<const double> grad, std::span<const double> mask,
             ChainPreconditioner* precond, std::span<double> dir) const {
    const std::size_t n = grad.size();
    for (std::size_t i = 0; i < n; ++i) dir[i] = grad[i] * mask[i];
    const int m = static_cast<int>(s.size());
    std::vector<double> alpha(m);
    for (int k = m - 1; k >= 0; --k) {
      double sd = 0.0;
      for (std::size_t i = 0; i < n; ++i) sd += s[k][i] * mask[i] * dir[i];
      alpha[k] = rho_sy[k] * sd;
      for (std::size_t i = 0; i < n; ++i) dir[i] -= alpha[k] * y[k][i] * mask[i];
    }
    if (precond != nullptr && precond->active) {
      precond->apply(dir, mask);
    } else if (m > 0) {
      double yy = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        yy += y.back()[i] * mask[i] * y.back()[i] * mask[i];
        sy += s.back()[i] * mask[i] * y.back()[i] * mask[i];
      }
      const double gamma = (yy > 0.0 && sy > 0.0) ? sy / yy : 1.0;
      for (std::size_t i = 0; i < n; ++i) dir[i] *= gamma;
    }
    for (int k = 0; k < m; ++k) {
      double yd = 0.0;
      for (std::size_t i = 0; i < n; ++i) yd += y[k][i] * mask[i] * dir[i];
      const double beta = rho_sy[k] * yd;
      for (std::size_t i = 0; i < n; ++i) dir[i] += (alpha[k] - beta) * s[k][i] * mask[i];
    }
    for (std::size_t i = 0; i < n; ++i) dir[i] *= mask[i];
  }
};

struct InnerResult {
  double pg_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Projected L-BFGS descent on the merit function over the box.
InnerResult minimize_bound_constrained(const Merit& merit, std::vector<double>& x,
                                       std::span<const double> lo, std::span<const double> hi,
                                       double tol, int max_iter, int memory, LbfgsMemory& mem) {
  const std::size_t n = x.size();
  std::vector<double> grad(n), dir(n), xt(n), gt(n), mask(n), pg(n);
  mem.capacity = memory;
  ChainPreconditioner precond;
  precond.setup(*merit.problem, x, merit.rho);

  double fx = merit.value(x);
  merit.gradient(x, grad);

  InnerResult res;
  double stall_best = fx;
  int stall_iters = 0;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      const double step = std::min(std::max(x[i] - grad[i], lo[i]), hi[i]);
      pg[i] = x[i] - step;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double eps_bound = 1e-9 * (1.0 + std::abs(x[i]));
      const bool at_lo = x[i] <= lo[i] + eps_bound && grad[i] > 0.0;
      const bool at_hi = x[i] >= hi[i] - eps_bound && grad[i] < 0.0;
      mask[i] = (at_lo || at_hi || lo[i] == hi[i]) ? 0.0 : 1.0;
    }
    res.pg_norm = inf_norm(pg);
    if (precond.active) {
      // Chains hide long coordinated descent directions from the max norm;
      // the preconditioned energy norm sees them at full size.
      res.pg_norm = std::max(res.pg_norm, precond_stationarity(precond, grad, mask));
    }
    res.iterations = it;
    if (res.pg_norm <= tol) return res;

    mem.apply(grad, mask, &precond, dir);
    for (std::size_t i = 0; i < n; ++i) dir[i] = -dir[i];

    double gd = dot(grad, dir);
    if (!(gd < 0.0)) {
      mem.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = -grad[i] * mask[i];
      gd = dot(grad, dir);
      if (!(gd < 0.0)) {
        for (std::size_t i = 0; i < n; ++i) dir[i] = -pg[i];
        gd = dot(grad, dir);
        if (!(gd < 0.0)) return res;  // projected gradient is numerically flat
      }
    }

    // Backtracking projected line search with an Armijo test on the actual step
    // and quadratic interpolation of the step size.
    bool accepted = false;
    double alpha = 1.0;
    double ft = fx;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xt[i] = x[i] + alpha * dir[i];
      project(xt, lo, hi);
      double step_dot = 0.0, step_norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = xt[i] - x[i];
        step_dot += grad[i] * d;
        step_norm = std::max(step_norm, std::abs(d));
      }
      if (step_norm == 0.0) break;
      ft = merit.value(xt);
      if (ft <= fx + 1e-4 * std::min(step_dot, 0.0)) {
        accepted = true;
        break;
      }
      double next = 0.5 * alpha;
      const double denom = ft - fx - step_dot;
      if (denom > 0.0 && step_dot < 0.0) {
        const double interp = -0.5 * step_dot * alpha * alpha / denom;
        next = std::min(std::max(interp, 0.1 * alpha), 0.5 * alpha);
      }
      alpha = next;
    }
    if (!accepted) {
      if (!mem.s.empty()) {
        mem.clear();
        continue;  // retry from steepest descent
      }
      return res;  // no further progress possible
    }

    merit.gradient(xt, gt);
    std::vector<double> sv(n), yv(n);
    for (std::size_t i = 0; i < n; ++i) {
      sv[i] = xt[i] - x[i];
      yv[i] = gt[i] - grad[i];
    }
    mem.push(std::move(sv), std::move(yv));
    x = xt;
    fx = ft;
    grad.swap(gt);

    // Give up early when the merit has flatlined.
    if (fx < stall_best - 1e-11 * (1.0 + std::abs(stall_best))) {
      stall_best = fx;
      stall_iters = 0;
    } else if (++stall_iters >= 50) {
      res.iterations = it + 1;
      return res;
    }
  }
  res.iterations = max_iter;
  return res;
}

}  // namespace

NlpSolution solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& opts) {
  return solve(problem, x0, opts, nullptr);
}

NlpSolution solve(const NlpProblem& problem, std::span<const double> x0,
                  const SolverOptions& opts, const SolverWarmStart* warm) {
  const int n = problem.num_vars();
  if (static_cast<int>(x0.size()) != n) {
    throw std::invalid_argument("solve: initial point dimension mismatch");
  }
  const auto& lo = problem.lower_bounds();
  const auto& hi = problem.upper_bounds();

  if (opts.fd_check) {
    std::vector<double> xc(x0.begin(), x0.end());
    project(xc, lo, hi);
    const double err = gradient_check(problem, xc);
    if (err > 1e-3) throw std::logic_error("fd_check: analytic derivatives disagree with finite differences");
  }

  std::vector<double> x(x0.begin(), x0.end());
  project(x, lo, hi);

  std::vector<double> lambda(problem.num_eq(), 0.0), mu(problem.num_ineq(), 0.0);
  std::vector<double> ceq(problem.num_eq()), cineq(problem.num_ineq());
  double rho = opts.penalty_init;
  if (warm != nullptr) {
    if (static_cast<int>(warm->lambda_eq.size()) == problem.num_eq()) lambda = warm->lambda_eq;
    if (static_cast<int>(warm->mu_ineq.size()) == problem.num_ineq()) mu = warm->mu_ineq;
    if (warm->penalty > 0.0) rho = warm->penalty;
  }

  NlpSolution sol;
  sol.x = x;
  sol.status = SolveStatus::MaxIter;

  auto violation_of = [&](std::span<const double> xq) {
    problem.constraints(xq, ceq, cineq);
    double v = 0.0;
    for (double c : ceq) v = std::max(v, std::abs(c));
    for (double c : cineq) v = std::max(v, c);
    return v;
  };

  // Classical update schedule: the feasibility threshold and inner tolerance
  // track the penalty so multiplier updates fire as soon as the subproblem is
  // solved well enough, and the penalty only grows when feasibility lags.
  double inner_tol = std::max(1.0 / rho, opts.optimality_tol);
  double feas_target = std::max(std::pow(rho, -0.1), opts.feasibility_tol);
  double best_violation = std::numeric_limits<double>::infinity();
  int stall_count = 0;
  constexpr double kRhoCap = 1e12;
  // The curvature the inner solver learns stays valid across multiplier
  // updates; only penalty growth rescales it.
  LbfgsMemory mem;

  for (int outer = 1; outer <= opts.max_outer_iter; ++outer) {
    Merit merit{&problem, lambda, mu, rho, {}, {}};
    const InnerResult inner = minimize_bound_constrained(
        merit, x, lo, hi, inner_tol, opts.max_inner_iter, opts.lbfgs_memory, mem);
    sol.inner_iterations += inner.iterations;
    sol.outer_iterations = outer;

    const double v = violation_of(x);
    const double merit_val = merit.value(x);
    sol.history.push_back({outer, merit_val, v, rho, inner.pg_norm, inner.iterations});
    if (opts.log) {
      (*opts.log) << "outer " << outer << "  merit " << merit_val << "  violation " << v
                  << "  pg " << inner.pg_norm << "  rho " << rho << "  inner "
                  << inner.iterations << "  vev " << merit.value_evals << "  gev "
                  << merit.grad_evals << "\n";
    }

    if (v <= best_violation) {
      best_violation = v;
      sol.x = x;
      sol.max_violation = v;
      sol.kkt_residual = inner.pg_norm;
    }

    if (v <= std::max(feas_target, opts.feasibility_tol)) {
      // First-order multiplier update.
      for (int j = 0; j < problem.num_eq(); ++j) lambda[j] += rho * ceq[j];
      for (int j = 0; j < problem.num_ineq(); ++j) mu[j] = std::max(0.0, mu[j] + rho * cineq[j]);
      if (v <= opts.feasibility_tol && inner.pg_norm <= opts.optimality_tol) {
        sol.status = SolveStatus::Converged;
        sol.x = x;
        sol.max_violation = v;
        sol.kkt_residual = inner.pg_norm;
        break;
      }
      // Tighten no faster than the inner solver can actually deliver; both
      // targets only ever shrink, so the loop cannot cycle.
      inner_tol = std::max(std::min(0.2 * inner_tol, 0.25 * inner.pg_norm), opts.optimality_tol);
      feas_target = std::max(0.2 * feas_target, 0.3 * opts.feasibility_tol);
      stall_count = 0;
    } else {
      rho = std::min(rho * opts.penalty_growth, kRhoCap);
      mem.clear();
      inner_tol = std::max(0.7 * inner_tol, opts.optimality_tol);
      feas_target = std::max(0.7 * feas_target, 0.3 * opts.feasibility_tol);
      if (rho >= kRhoCap * 0.99 && v > 0.5 * best_violation && v > opts.feasibility_tol) {
        ++stall_count;
        if (stall_count >= 2) {
          sol.status = SolveStatus::Infeasible;
          break;
        }
      }
    }
  }

  sol.objective = problem.objective(sol.x);
  if (sol.status != SolveStatus::Converged) {
    sol.max_violation = violation_of(sol.x);
  }
  sol.lambda_eq = std::move(lambda);
  sol.mu_ineq = std::move(mu);
  sol.penalty_final = rho;
  return sol;
}

double gradient_check(const NlpProblem& problem, std::span<const double> x, double fd_step) {
  const int n = problem.num_vars();
  const int m_eq = problem.num_eq();
  const int m = m_eq + problem.num_ineq();
  std::vector<double> xp(x.begin(), x.end()), xm(x.begin(), x.end());
  std::vector<double> ceq_p(m_eq), cin_p(problem.num_ineq());
  std::vector<double> ceq_m(m_eq), cin_m(problem.num_ineq());

  // Finite-difference Jacobian and objective gradient, column by column.
  std::vector<double> fd(static_cast<std::size_t>(m) * n, 0.0);
  std::vector<double> fd_obj(n, 0.0);
  for (int jcol = 0; jcol < n; ++jcol) {
    const double step = fd_step * (1.0 + std::abs(x[jcol]));
    xp[jcol] = x[jcol] + step;
    xm[jcol] = x[jcol] - step;
    problem.constraints(xp, ceq_p, cin_p);
    problem.constraints(xm, ceq_m, cin_m);
    const double obj_p = problem.objective(xp);
    const double obj_m = problem.objective(xm);
    for (int r = 0; r < m_eq; ++r) fd[static_cast<std::size_t>(r) * n + jcol] = (ceq_p[r] - ceq_m[r]) / (2.0 * step);
    for (int r = 0; r < problem.num_ineq(); ++r) {
      fd[static_cast<std::size_t>(m_eq + r) * n + jcol] = (cin_p[r] - cin_m[r]) / (2.0 * step);
    }
    fd_obj[jcol] = (obj_p - obj_m) / (2.0 * step);
    xp[jcol] = x[jcol];
    xm[jcol] = x[jcol];
  }

  double worst = 0.0;
  std::vector<double> row(n);
  for (int r = 0; r < m; ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    problem.jacobian_row(x, r, row);
    for (int j = 0; j < n; ++j) {
      const double a = row[j];
      const double f = fd[static_cast<std::size_t>(r) * n + j];
      worst = std::max(worst, std::abs(a - f) / std::max({1.0, std::abs(a), std::abs(f)}));
    }
  }
  std::vector<double> og(n, 0.0);
  problem.objective_gradient(x, og);
  for (int j = 0; j < n; ++j) {
    worst = std::max(worst, std::abs(og[j] - fd_obj[j]) / std::max({1.0, std::abs(og[j]), std::abs(fd_obj[j])}));
  }
  return worst;
}

}  // namespace trackpace
