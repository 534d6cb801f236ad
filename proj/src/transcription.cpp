#include "trackpace/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace trackpace {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxTime = 1000.0;
constexpr double kZPhysMin = 0.02;  // v <= 50 m/s
constexpr double kZPhysMax = 5.0;   // v >= 0.2 m/s
// Slope weights per defect family: residuals are (state slope error) * weight,
// sized so a unit weighted residual matches a unit decision-variable move.
constexpr double kWeightY = 1.0;    // dy/ds is O(0.1 .. 0.5) s/m
constexpr double kWeightZ = 20.0;   // dz/ds is O(0.01 .. 0.6) 1/m
constexpr double kWeightE = 0.1;    // de/ds is O(10) W s/m
constexpr double kCenBoost = 20.0;  // lifts the force-circle rows to O(1)
constexpr double kTimeReport = 20.0;  // objective stays about 1 for a 20 s race
}  // namespace

Grid Grid::uniform(double length, int n_nodes) {
  if (n_nodes < 2 || !(length > 0.0)) {
    throw std::invalid_argument("grid needs length > 0 and at least 2 nodes");
  }
  Grid g;
  g.n_nodes = n_nodes;
  g.length = length;
  g.h = length / (n_nodes - 1);
  return g;
}

Grid default_grid(const Track& track, int n_nodes) {
  return Grid::uniform(track.distance(), n_nodes);
}

RaceNlp transcribe_single(const Track& track, int lane, const RunnerParams& params,
                          const Grid& grid) {
  params.validate();
  RaceNlp p;
  p.track_ = std::make_shared<Track>(track);
  p.grid_ = grid;
  p.n_ = grid.n_nodes;
  p.runner_count_ = 1;
  p.lanes_ = {lane, lane};
  p.params_ = {params, params};
  p.setup(track);
  return p;
}

RaceNlp transcribe_pair(const Track& track, std::pair<int, int> lanes,
                        std::pair<RunnerParams, RunnerParams> params,
                        const InteractionConfig& cfg, const Grid& grid, WinnerBranch branch,
                        double winner_weight) {
  params.first.validate();
  params.second.validate();
  cfg.validate();
  RaceNlp p;
  p.track_ = std::make_shared<Track>(track);
  p.grid_ = grid;
  p.n_ = grid.n_nodes;
  p.runner_count_ = 2;
  p.lanes_ = {lanes.first, lanes.second};
  p.params_ = {params.first, params.second};
  p.cfg_ = cfg;
  p.branch_ = branch;
  p.winner_weight_ = winner_weight;
  p.coupled_ = cfg.gamma > 0.0 && lateral_attenuation(lanes.first, lanes.second) > 0.0;
  if (p.coupled_ && cfg.eta > 0.0) {
    const double w = cfg.eta / grid.h;
    const double rounded = std::round(w);
    if (std::abs(w - rounded) > 1e-6 * std::max(1.0, w)) {
      throw std::invalid_argument(
          "inhibition window eta must be an integer number of grid steps");
    }
    p.window_ = static_cast<int>(rounded);
  }
  p.setup(track);
  return p;
}

void RaceNlp::setup(const Track& track) {
  const int n = n_;
  const int r_count = runner_count_;
  vars_per_runner_ = 5 * n - 1;
  const int nvar = r_count * vars_per_runner_;

  curv_.resize(r_count * n);
  theta_.resize(r_count * n);
  for (int r = 0; r < r_count; ++r) {
    for (int i = 0; i < n; ++i) {
      const double s = grid_.node(i);
      curv_[r * n + i] = track.curvature(lanes_[r], s);
      theta_[r * n + i] = track.angular_position(lanes_[r], s);
    }
    const RunnerParams& p = params_[r];
    const double v0 = 1.0 / p.z0;
    const double c0 = curv_[r * n];
    if (c0 * c0 * v0 * v0 * v0 * v0 > p.f_max * p.f_max) {
      throw std::invalid_argument("initial speed infeasible for the start curvature");
    }
  }

  const double h = grid_.h;
  sy_ = h / kWeightY;
  sz_ = h / kWeightZ;
  se_ = h / kWeightE;

  lower_.assign(nvar, 0.0);
  upper_.assign(nvar, 0.0);
  for (int r = 0; r < r_count; ++r) {
    const RunnerParams& p = params_[r];
    sf_[r] = h * p.u_max;
    // The trapezoidal map for dz/ds = z^2/tau - f z^3 develops a spurious
    // second branch beyond z = 2 tau / h; keep the box below it where the grid
    // allows, while never boxing out the launch speed itself.
    const double z_hi = std::min(kZPhysMax, std::max(1.6 * p.tau / h, 2.5 * p.z0));
    for (int i = 0; i < n; ++i) {
      lower_[var_y(r, i)] = 0.0;
      upper_[var_y(r, i)] = kMaxTime / sy_;

      lower_[var_z(r, i)] = kZPhysMin / sz_;
      upper_[var_z(r, i)] = z_hi / sz_;

      lower_[var_e(r, i)] = 0.0;
      upper_[var_e(r, i)] = p.e0 / se_;

      lower_[var_f(r, i)] = 0.0;
      upper_[var_f(r, i)] = p.f_max / sf_[r];
    }
    for (int i = 0; i + 1 < n; ++i) {
      lower_[var_u(r, i)] = -1.0;
      upper_[var_u(r, i)] = 1.0;
    }
    // Initial conditions pin y, z, e at the first node; f(0) stays free.
    lower_[var_y(r, 0)] = upper_[var_y(r, 0)] = 0.0;
    lower_[var_z(r, 0)] = upper_[var_z(r, 0)] = p.z0 / sz_;
    lower_[var_e(r, 0)] = upper_[var_e(r, 0)] = p.e0 / se_;

    rho_y_[r] = kWeightY / h;
    rho_z_[r] = kWeightZ / h;
    rho_e_[r] = kWeightE / h;
    rho_f_[r] = 1.0 / (h * p.u_max);
    rho_c_[r] = kCenBoost / (p.f_max * p.f_max);
  }

  ys_.resize(r_count * n);
  zs_.resize(r_count * n);
  es_.resize(r_count * n);
  fs_.resize(r_count * n);
  us_.resize(r_count * (n - 1));
  rhs_z_.resize(r_count * n);
  rhs_e_.resize(r_count * n);
  if (runner_count_ == 2) {
    gap_.resize(n);
    fint_.resize(2 * n);
    dfint_.resize(2 * n);
    inhib_.assign(n, 1.0);
    if (window_ > 0) {
      logh_.resize(n);
      dlogh_prev_.resize(n);
      dlogh_cur_.resize(n);
      logh_prefix_.resize(n + 1);
    }
    awin_.resize(n);
    awin_prefix_.resize(n + 1);
    gap_grad_.resize(n);
  }
}

void RaceNlp::eval_states(std::span<const double> x) const {
  const int n = n_;
  for (int r = 0; r < runner_count_; ++r) {
#pragma omp parallel for schedule(static) if (parallel_)
    for (int i = 0; i < n; ++i) {
      ys_[r * n + i] = x[var_y(r, i)] * sy_;
      zs_[r * n + i] = x[var_z(r, i)] * sz_;
      es_[r * n + i] = x[var_e(r, i)] * se_;
      fs_[r * n + i] = x[var_f(r, i)] * sf_[r];
    }
    for (int i = 0; i + 1 < n; ++i) {
      us_[r * (n - 1) + i] = x[var_u(r, i)] * params_[r].u_max;
    }
  }
}

void RaceNlp::eval_coupling() const {
  if (!coupled_) return;
  const int n = n_;
#pragma omp parallel for schedule(static) if (parallel_)
  for (int j = 0; j < n; ++j) {
    const double v1 = 1.0 / zs_[j];
    const double v2 = 1.0 / zs_[n + j];
    gap_[j] = distance_gap(ys_[j], ys_[n + j], v1, v2, theta_[j], theta_[n + j], curv_[j],
                           curv_[n + j]);
    fint_[j] = interaction_strength(gap_[j], lanes_[0], lanes_[1], cfg_);
    fint_[n + j] = interaction_strength(-gap_[j], lanes_[0], lanes_[1], cfg_);
    dfint_[j] = interaction_strength_deriv(gap_[j], lanes_[0], lanes_[1], cfg_);
    dfint_[n + j] = -interaction_strength_deriv(-gap_[j], lanes_[0], lanes_[1], cfg_);
  }
  if (window_ > 0) {
#pragma omp parallel for schedule(static) if (parallel_)
    for (int t = 1; t < n; ++t) {
      logh_[t] = detail::overtake_log_factor(gap_[t - 1], gap_[t], cfg_, &dlogh_prev_[t],
                                             &dlogh_cur_[t]);
    }
    logh_prefix_[0] = 0.0;
    logh_prefix_[1] = 0.0;  // node 0 has no gap pair
    for (int t = 1; t < n; ++t) logh_prefix_[t + 1] = logh_prefix_[t] + logh_[t];
    inhib_[0] = 1.0;
#pragma omp parallel for schedule(static) if (parallel_)
    for (int j = 1; j < n; ++j) {
      const int lo = std::max(j - window_, 0);
      inhib_[j] = std::exp(logh_prefix_[j + 1] - logh_prefix_[lo + 1]);
    }
  } else {
    std::fill(inhib_.begin(), inhib_.end(), 1.0);
  }
}

void RaceNlp::eval_rhs() const {
  const int n = n_;
  for (int r = 0; r < runner_count_; ++r) {
    const RunnerParams& p = params_[r];
#pragma omp parallel for schedule(static) if (parallel_)
    for (int j = 0; j < n; ++j) {
      const double z = zs_[r * n + j];
      const double f = fs_[r * n + j];
      const double fric = coupled_ ? 1.0 - inhib_[j] * fint_[r * n + j] : 1.0;
      rhs_z_[r * n + j] = z * z / p.tau * fric - f * z * z * z;
      rhs_e_[r * n + j] = sigma(es_[r * n + j], p) * z - f;
    }
  }
}

double RaceNlp::objective(std::span<const double> x) const {
  const double report = sy_ / kTimeReport;
  if (runner_count_ == 1) return x[var_y(0, n_ - 1)] * report;
  const int w = branch_ == WinnerBranch::Runner1Wins ? 0 : 1;
  const int l = 1 - w;
  return (x[var_y(w, n_ - 1)] * (1.0 + winner_weight_) + x[var_y(l, n_ - 1)] * winner_weight_) *
         report;
}

void RaceNlp::objective_gradient(std::span<const double> /*x*/, std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double report = sy_ / kTimeReport;
  if (runner_count_ == 1) {
    grad[var_y(0, n_ - 1)] = report;
    return;
  }
  const int w = branch_ == WinnerBranch::Runner1Wins ? 0 : 1;
  const int l = 1 - w;
  grad[var_y(w, n_ - 1)] = (1.0 + winner_weight_) * report;
  grad[var_y(l, n_ - 1)] = winner_weight_ * report;
}

void RaceNlp::constraints(std::span<const double> x, std::span<double> c_eq,
                          std::span<double> c_ineq) const {
  eval_states(x);
  eval_coupling();
  eval_rhs();
  const int n = n_;
  const double h = grid_.h;
  for (int r = 0; r < runner_count_; ++r) {
    const double* y = &ys_[r * n];
    const double* z = &zs_[r * n];
    const double* e = &es_[r * n];
    const double* f = &fs_[r * n];
    const double* u = &us_[r * (n - 1)];
    const double* rz = &rhs_z_[r * n];
    const double* re = &rhs_e_[r * n];
#pragma omp parallel for schedule(static) if (parallel_)
    for (int i = 0; i < n - 1; ++i) {
      c_eq[row_yd(r, i)] = ((y[i + 1] - y[i]) - 0.5 * h * (z[i] + z[i + 1])) * rho_y_[r];
      c_eq[row_zd(r, i)] = ((z[i + 1] - z[i]) - 0.5 * h * (rz[i] + rz[i + 1])) * rho_z_[r];
      c_eq[row_ed(r, i)] = ((e[i + 1] - e[i]) - 0.5 * h * (re[i] + re[i + 1])) * rho_e_[r];
      c_eq[row_fl(r, i)] = ((f[i + 1] - f[i]) - h * u[i]) * rho_f_[r];
    }
    const double fm2 = params_[r].f_max * params_[r].f_max;
#pragma omp parallel for schedule(static) if (parallel_)
    for (int i = 0; i < n; ++i) {
      const double c = curv_[r * n + i];
      const double zi = z[i];
      const double z2 = zi * zi;
      c_ineq[ineq_centrifugal(r, i)] = (f[i] * f[i] + c * c / (z2 * z2) - fm2) * rho_c_[r];
    }
  }
  if (runner_count_ == 2) {
    const int w = branch_ == WinnerBranch::Runner1Wins ? 0 : 1;
    c_ineq[ineq_ordering()] = x[var_y(w, n - 1)] - x[var_y(1 - w, n - 1)];
  }
}

void RaceNlp::constraints_reference(std::span<const double> x, std::span<double> c_eq,
                                    std::span<double> c_ineq) const {
  // Literal serial restatement of the discretized problem, used to validate
  // the optimized kernels.
  const int n = n_;
  const double h = grid_.h;
  std::vector<double> y(n), z(n), e(n), f(n), u(n - 1);
  std::vector<std::vector<double>> ys(2), zs(2);
  std::vector<double> gap(n, 0.0), inhib(n, 1.0);

  if (runner_count_ == 2 && coupled_) {
    for (int r = 0; r < 2; ++r) {
      ys[r].resize(n);
      zs[r].resize(n);
      for (int i = 0; i < n; ++i) {
        ys[r][i] = x[var_y(r, i)] * sy_;
        zs[r][i] = x[var_z(r, i)] * sz_;
      }
    }
    for (int j = 0; j < n; ++j) {
      gap[j] = distance_gap(ys[0][j], ys[1][j], 1.0 / zs[0][j], 1.0 / zs[1][j], theta_[j],
                            theta_[n + j], curv_[j], curv_[n + j]);
    }
    if (window_ > 0) {
      for (int j = 1; j < n; ++j) {
        const int lo = std::max(j - window_, 0);
        inhib[j] = inhibition(std::span(gap).subspan(lo, j - lo + 1), cfg_);
      }
    }
  }

  for (int r = 0; r < runner_count_; ++r) {
    const RunnerParams& p = params_[r];
    for (int i = 0; i < n; ++i) {
      y[i] = x[var_y(r, i)] * sy_;
      z[i] = x[var_z(r, i)] * sz_;
      e[i] = x[var_e(r, i)] * se_;
      f[i] = x[var_f(r, i)] * sf_[r];
    }
    for (int i = 0; i + 1 < n; ++i) u[i] = x[var_u(r, i)] * p.u_max;

    auto rhs_z = [&](int j) {
      double fric = 1.0;
      if (coupled_) {
        const double fj = interaction_strength(r == 0 ? gap[j] : -gap[j], lanes_[0], lanes_[1], cfg_);
        fric = 1.0 - inhib[j] * fj;
      }
      return z[j] * z[j] / p.tau * fric - f[j] * z[j] * z[j] * z[j];
    };
    auto rhs_e = [&](int j) { return sigma(e[j], p) * z[j] - f[j]; };

    for (int i = 0; i < n - 1; ++i) {
      c_eq[row_yd(r, i)] = ((y[i + 1] - y[i]) - 0.5 * h * (z[i] + z[i + 1])) * rho_y_[r];
      c_eq[row_zd(r, i)] = ((z[i + 1] - z[i]) - 0.5 * h * (rhs_z(i) + rhs_z(i + 1))) * rho_z_[r];
      c_eq[row_ed(r, i)] = ((e[i + 1] - e[i]) - 0.5 * h * (rhs_e(i) + rhs_e(i + 1))) * rho_e_[r];
      c_eq[row_fl(r, i)] = ((f[i + 1] - f[i]) - h * u[i]) * rho_f_[r];
    }
    for (int i = 0; i < n; ++i) {
      const double c = curv_[r * n + i];
      c_ineq[ineq_centrifugal(r, i)] =
          (f[i] * f[i] + c * c / (z[i] * z[i] * z[i] * z[i]) - p.f_max * p.f_max) * rho_c_[r];
    }
  }
  if (runner_count_ == 2) {
    const int w = branch_ == WinnerBranch::Runner1Wins ? 0 : 1;
    c_ineq[ineq_ordering()] = x[var_y(w, n - 1)] - x[var_y(1 - w, n - 1)];
  }
}

void RaceNlp::add_weighted_constraint_gradient(std::span<const double> x,
                                               std::span<const double> w_eq,
                                               std::span<const double> w_ineq,
                                               std::span<double> grad) const {
  eval_states(x);
  eval_coupling();
  eval_rhs();
  const int n = n_;
  const double h = grid_.h;

  for (int r = 0; r < runner_count_; ++r) {
    const RunnerParams& p = params_[r];
    const double* z = &zs_[r * n];
    const double* e = &es_[r * n];
    const double* f = &fs_[r * n];
    const double sy = sy_, sz = sz_, se = se_, sf = sf_[r], su = p.u_max;
    const double ry = rho_y_[r], rz = rho_z_[r], re = rho_e_[r], rf = rho_f_[r], rc = rho_c_[r];
    const int base_yd = row_yd(r, 0), base_zd = row_zd(r, 0), base_ed = row_ed(r, 0),
              base_fl = row_fl(r, 0);

#pragma omp parallel for schedule(static) if (parallel_)
    for (int j = 0; j < n; ++j) {
      const double wy_m = j > 0 ? w_eq[base_yd + j - 1] : 0.0;
      const double wy_p = j < n - 1 ? w_eq[base_yd + j] : 0.0;
      const double wz_m = j > 0 ? w_eq[base_zd + j - 1] : 0.0;
      const double wz_p = j < n - 1 ? w_eq[base_zd + j] : 0.0;
      const double we_m = j > 0 ? w_eq[base_ed + j - 1] : 0.0;
      const double we_p = j < n - 1 ? w_eq[base_ed + j] : 0.0;
      const double wf_m = j > 0 ? w_eq[base_fl + j - 1] : 0.0;
      const double wf_p = j < n - 1 ? w_eq[base_fl + j] : 0.0;
      const double wc = w_ineq[ineq_centrifugal(r, j)];

      const double zj = z[j], fj = f[j], ej = e[j];
      const double fric = coupled_ ? 1.0 - inhib_[j] * fint_[r * n + j] : 1.0;
      const double dz_rhs_dz = 2.0 * zj / p.tau * fric - 3.0 * fj * zj * zj;
      const double de_rhs_de = ej > 0.0 ? -(p.sigma_f / p.e0) * zj : 0.0;
      const double sig = sigma(ej, p);
      const double cj = curv_[r * n + j];

      grad[var_y(r, j)] += sy * ry * (wy_m - wy_p);
      grad[var_z(r, j)] +=
          sz * (-0.5 * h * ry * (wy_m + wy_p) +
                rz * (wz_m - wz_p - 0.5 * h * dz_rhs_dz * (wz_m + wz_p)) -
                0.5 * h * re * sig * (we_m + we_p) -
                wc * rc * 4.0 * cj * cj / (zj * zj * zj * zj * zj));
      grad[var_e(r, j)] += se * re * (we_m - we_p - 0.5 * h * de_rhs_de * (we_m + we_p));
      grad[var_f(r, j)] += sf * (0.5 * h * rz * zj * zj * zj * (wz_m + wz_p) +
                                 0.5 * h * re * (we_m + we_p) + rf * (wf_m - wf_p) +
                                 wc * rc * 2.0 * fj);
    }
#pragma omp parallel for schedule(static) if (parallel_)
    for (int i = 0; i < n - 1; ++i) {
      grad[var_u(r, i)] += -su * rf * h * w_eq[base_fl + i];
    }
  }

  if (runner_count_ == 2 && coupled_) {
    // Chain through the gap: direct F(r) dependence plus the inhibition window.
    const double h2 = 0.5 * h;
#pragma omp parallel for schedule(static) if (parallel_)
    for (int j = 0; j < n; ++j) {
      double a = 0.0, direct = 0.0;
      for (int r = 0; r < 2; ++r) {
        const int base_zd = row_zd(r, 0);
        const double wsum = (j > 0 ? w_eq[base_zd + j - 1] : 0.0) +
                            (j < n - 1 ? w_eq[base_zd + j] : 0.0);
        const double zj = zs_[r * n + j];
        const double k = h2 * rho_z_[r] * wsum * zj * zj / params_[r].tau;
        a += k * fint_[r * n + j];
        direct += k * inhib_[j] * dfint_[r * n + j];
      }
      awin_[j] = a;
      gap_grad_[j] = direct;
    }
    if (window_ > 0) {
      awin_prefix_[0] = 0.0;
      for (int j = 0; j < n; ++j) awin_prefix_[j + 1] = awin_prefix_[j] + awin_[j] * inhib_[j];
      // dPhi/dL_t = sum of a_j I_j over the nodes j whose window contains t.
#pragma omp parallel for schedule(static) if (parallel_)
      for (int m = 0; m < n; ++m) {
        double g = 0.0;
        if (m >= 1) {
          const int hi = std::min(m + window_ - 1, n - 1);
          const double b = awin_prefix_[hi + 1] - awin_prefix_[m];
          g += b * dlogh_cur_[m];
        }
        if (m + 1 <= n - 1) {
          const int t = m + 1;
          const int hi = std::min(t + window_ - 1, n - 1);
          const double b = awin_prefix_[hi + 1] - awin_prefix_[t];
          g += b * dlogh_prev_[t];
        }
        gap_grad_[m] += g;
      }
    }
#pragma omp parallel for schedule(static) if (parallel_)
    for (int m = 0; m < n; ++m) {
      const double g = gap_grad_[m];
      if (g == 0.0) continue;
      const double z1 = zs_[m], z2 = zs_[n + m];
      const double vbar = 0.5 * (1.0 / z1 + 1.0 / z2);
      const double dy = ys_[n + m] - ys_[m];
      grad[var_y(0, m)] += g * (-vbar) * sy_;
      grad[var_y(1, m)] += g * (+vbar) * sy_;
      grad[var_z(0, m)] += g * (-0.5 * dy / (z1 * z1)) * sz_;
      grad[var_z(1, m)] += g * (-0.5 * dy / (z2 * z2)) * sz_;
    }
  }

  if (runner_count_ == 2) {
    const double wo = w_ineq[ineq_ordering()];
    const int w = branch_ == WinnerBranch::Runner1Wins ? 0 : 1;
    grad[var_y(w, n - 1)] += wo;
    grad[var_y(1 - w, n - 1)] -= wo;
  }
}

NlpProblem::CurvatureSketch RaceNlp::curvature_sketch(std::span<const double> x) const {
  CurvatureSketch sketch;
  sketch.extra_diag.assign(num_vars(), 0.0);
  const int n = n_;
  for (int r = 0; r < runner_count_; ++r) {
    std::vector<int> ychain(n), zchain(n), echain(n), fchain(n);
    for (int i = 0; i < n; ++i) {
      ychain[i] = var_y(r, i);
      zchain[i] = var_z(r, i);
      echain[i] = var_e(r, i);
      fchain[i] = var_f(r, i);
    }
    sketch.chains.push_back(std::move(ychain));
    sketch.chains.push_back(std::move(zchain));
    sketch.chains.push_back(std::move(echain));
    sketch.chains.push_back(std::move(fchain));
    for (int i = 0; i < n; ++i) {
      const double z = x[var_z(r, i)] * sz_;
      const double f = x[var_f(r, i)] * sf_[r];
      const double c = curv_[r * n + i];
      const double dz = rho_c_[r] * 4.0 * c * c / (z * z * z * z * z) * sz_;
      const double df = rho_c_[r] * 2.0 * f * sf_[r];
      sketch.extra_diag[var_z(r, i)] += dz * dz;
      sketch.extra_diag[var_f(r, i)] += df * df;
    }
    for (int i = 0; i + 1 < n; ++i) {
      sketch.extra_diag[var_u(r, i)] += 1.0;  // force-rate rows have unit entries
    }
  }
  return sketch;
}

std::vector<std::vector<int>> RaceNlp::jacobian_sparsity() const {
  const int n = n_;
  std::vector<std::vector<int>> rows(num_eq() + num_ineq());
  for (int r = 0; r < runner_count_; ++r) {
    for (int i = 0; i < n - 1; ++i) {
      rows[row_yd(r, i)] = {var_y(r, i), var_y(r, i + 1), var_z(r, i), var_z(r, i + 1)};

      std::vector<int> zd = {var_z(r, i), var_z(r, i + 1), var_f(r, i), var_f(r, i + 1)};
      if (coupled_) {
        const int lo = std::max(i - window_, 0);
        for (int m = lo; m <= i + 1; ++m) {
          zd.push_back(var_y(0, m));
          zd.push_back(var_y(1, m));
          zd.push_back(var_z(0, m));
          zd.push_back(var_z(1, m));
        }
      }
      std::sort(zd.begin(), zd.end());
      zd.erase(std::unique(zd.begin(), zd.end()), zd.end());
      rows[row_zd(r, i)] = std::move(zd);

      rows[row_ed(r, i)] = {var_z(r, i), var_z(r, i + 1), var_e(r, i),
                            var_e(r, i + 1), var_f(r, i), var_f(r, i + 1)};
      rows[row_fl(r, i)] = {var_f(r, i), var_f(r, i + 1), var_u(r, i)};
    }
    for (int i = 0; i < n; ++i) {
      std::vector<int> cen = {var_f(r, i)};
      if (curv_[r * n + i] != 0.0) cen.push_back(var_z(r, i));
      std::sort(cen.begin(), cen.end());
      rows[num_eq() + ineq_centrifugal(r, i)] = std::move(cen);
    }
  }
  if (runner_count_ == 2) {
    std::vector<int> ord = {var_y(0, n - 1), var_y(1, n - 1)};
    std::sort(ord.begin(), ord.end());
    rows[num_eq() + ineq_ordering()] = std::move(ord);
  }
  return rows;
}

RaceNlp::RunnerStates RaceNlp::unpack(std::span<const double> x, int runner) const {
  const int n = n_;
  RunnerStates st;
  st.y.resize(n);
  st.z.resize(n);
  st.e.resize(n);
  st.f.resize(n);
  st.u.resize(n - 1);
  const RunnerParams& p = params_[runner];
  for (int i = 0; i < n; ++i) {
    st.y[i] = x[var_y(runner, i)] * sy_;
    st.z[i] = x[var_z(runner, i)] * sz_;
    st.e[i] = x[var_e(runner, i)] * se_;
    st.f[i] = x[var_f(runner, i)] * sf_[runner];
  }
  for (int i = 0; i + 1 < n; ++i) st.u[i] = x[var_u(runner, i)] * p.u_max;
  return st;
}

std::vector<double> RaceNlp::pack(const RunnerStates& r1, const RunnerStates* r2) const {
  if ((runner_count_ == 2) != (r2 != nullptr)) {
    throw std::invalid_argument("pack: runner count mismatch");
  }
  std::vector<double> x(num_vars(), 0.0);
  for (int r = 0; r < runner_count_; ++r) {
    const RunnerStates& st = r == 0 ? r1 : *r2;
    const RunnerParams& p = params_[r];
    for (int i = 0; i < n_; ++i) {
      x[var_y(r, i)] = st.y[i] / sy_;
      x[var_z(r, i)] = st.z[i] / sz_;
      x[var_e(r, i)] = st.e[i] / se_;
      x[var_f(r, i)] = st.f[i] / sf_[r];
    }
    for (int i = 0; i + 1 < n_; ++i) x[var_u(r, i)] = st.u[i] / p.u_max;
  }
  for (std::size_t v = 0; v < x.size(); ++v) {
    x[v] = std::min(std::max(x[v], lower_[v]), upper_[v]);
  }
  return x;
}

double RaceNlp::final_time(std::span<const double> x, int runner) const {
  return x[var_y(runner, n_ - 1)] * sy_;
}

std::vector<double> RaceNlp::gap_profile(std::span<const double> x) const {
  if (runner_count_ != 2) throw std::logic_error("gap_profile needs a pair problem");
  const int n = n_;
  std::vector<double> r(n);
  for (int j = 0; j < n; ++j) {
    const double z1 = x[var_z(0, j)] * sz_;
    const double z2 = x[var_z(1, j)] * sz_;
    r[j] = distance_gap(x[var_y(0, j)] * sy_, x[var_y(1, j)] * sy_, 1.0 / z1, 1.0 / z2,
                        theta_[j], theta_[n + j], curv_[j], curv_[n + j]);
  }
  return r;
}

std::vector<double> RaceNlp::inhibition_profile(std::span<const double> x) const {
  const std::vector<double> r = gap_profile(x);
  const int n = n_;
  std::vector<double> inhib(n, 1.0);
  if (window_ > 0) {
    for (int j = 1; j < n; ++j) {
      const int lo = std::max(j - window_, 0);
      inhib[j] = inhibition(std::span(r).subspan(lo, j - lo + 1), cfg_);
    }
  }
  return inhib;
}

namespace {

std::vector<double> cumtrapz(std::span<const double> s, std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) {
    out[i] = out[i - 1] + 0.5 * (s[i] - s[i - 1]) * (v[i] + v[i - 1]);
  }
  return out;
}

}  // namespace

std::vector<double> RaceNlp::initial_guess(GuessStrategy strategy, const RunnerStates* solo1,
                                           const RunnerStates* solo2) const {
  const int n = n_;
  const double d = grid_.length;

  auto constant_speed = [&](int r) {
    const RunnerParams& p = params_[r];
    RunnerStates st;
    st.y.resize(n);
    st.z.resize(n);
    st.e.resize(n);
    st.f.resize(n);
    st.u.resize(n - 1);
    const double v0 = 1.0 / p.z0;
    const double vt = 10.0;  // a 20 s race as the seed
    const double ramp = std::min(10.0, d / 4.0);
    std::vector<double> s(n);
    for (int i = 0; i < n; ++i) {
      s[i] = grid_.node(i);
      const double v = v0 + (vt - v0) * std::min(1.0, s[i] / ramp);
      st.z[i] = 1.0 / v;
      st.e[i] = p.e0 * (1.0 - s[i] / d);
      const double c = curv_[r * n + i];
      const double cap2 = p.f_max * p.f_max - c * c * v * v * v * v;
      const double cap = cap2 > 0.0 ? 0.95 * std::sqrt(cap2) : 0.0;
      st.f[i] = std::min(v / p.tau, cap);
    }
    st.y = cumtrapz(s, st.z);
    for (int i = 0; i + 1 < n; ++i) {
      const double du = (st.f[i + 1] - st.f[i]) / grid_.h;
      st.u[i] = std::min(std::max(du, -p.u_max), p.u_max);
    }
    return st;
  };

  if (strategy == GuessStrategy::ConstantSpeed) {
    RunnerStates a = constant_speed(0);
    if (runner_count_ == 1) return pack(a);
    RunnerStates b = constant_speed(1);
    return pack(a, &b);
  }

  if (solo1 == nullptr || (runner_count_ == 2 && solo2 == nullptr)) {
    throw std::invalid_argument("initial guess strategy needs solo trajectories");
  }
  if (strategy == GuessStrategy::SoloSolution) {
    return runner_count_ == 1 ? pack(*solo1) : pack(*solo1, solo2);
  }

  // PerturbedOvertakes: superpose opposite speed waves on the solo solutions so
  // the seeded gap changes sign twice along the race.
  if (runner_count_ == 1) return pack(*solo1);
  RunnerStates a = *solo1;
  RunnerStates b = *solo2;
  const double r0 = distance_gap(0.0, 0.0, 1.0 / params_[0].z0, 1.0 / params_[1].z0, theta_[0],
                                 theta_[n], curv_[0], curv_[n]);
  const double amp = 0.12 * std::abs(r0) + 0.02;  // seconds of time-shift amplitude
  const double sign = r0 > 0.0 ? 1.0 : -1.0;
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) s[i] = grid_.node(i);
  for (int i = 0; i < n; ++i) {
    const double wave = std::cos(2.0 * kPi * s[i] / d) * (2.0 * kPi / d) * amp * sign;
    a.z[i] = std::max(a.z[i] + 0.5 * wave, kZPhysMin);
    b.z[i] = std::max(b.z[i] - 0.5 * wave, kZPhysMin);
  }
  a.y = cumtrapz(s, a.z);
  b.y = cumtrapz(s, b.z);
  return pack(a, &b);
}

}  // namespace trackpace
