#include "trackpace/interaction.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace trackpace {

namespace {
// Floor for the normalized sign product; keeps the overtaking detector smooth
// through gap values straddling zero.
constexpr double kSignFloor = 1e-6;
constexpr double kMinCurvatureSum = 1e-9;
}  // namespace

InteractionConfig InteractionConfig::from_json(const nlohmann::json& spec) {
  InteractionConfig cfg;
  cfg.gamma = spec.value("gamma", cfg.gamma);
  cfg.a1 = spec.value("a1", cfg.a1);
  cfg.a2 = spec.value("a2", cfg.a2);
  cfg.b1 = spec.value("b1", cfg.b1);
  cfg.b2 = spec.value("b2", cfg.b2);
  cfg.eps = spec.value("eps", cfg.eps);
  cfg.eta = spec.value("eta", cfg.eta);
  cfg.inhibition_sharpness = spec.value("inhibition_sharpness", cfg.inhibition_sharpness);
  cfg.validate();
  return cfg;
}

void InteractionConfig::validate() const {
  if (gamma < 0.0 || eta < 0.0) {
    throw std::invalid_argument("interaction: gamma and eta must be nonnegative");
  }
  if (b1 <= 0.0 || b2 <= 0.0 || inhibition_sharpness <= 0.0) {
    throw std::invalid_argument("interaction: slopes must be positive");
  }
}

double heaviside(double r, double k, double eps) {
  const double t = 2.0 * k * (r + eps);
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double et = std::exp(t);
  return et / (1.0 + et);
}

double heaviside_deriv(double r, double k, double eps) {
  const double h = heaviside(r, k, eps);
  return 2.0 * k * h * (1.0 - h);
}

double lateral_attenuation(int lane1, int lane2) {
  const int gap = lane1 > lane2 ? lane1 - lane2 : lane2 - lane1;
  if (gap >= 4) return 0.0;
  return 1.0 - gap / 10.0;
}

double interaction_strength(double r, int lane1, int lane2, const InteractionConfig& cfg) {
  const double a = lateral_attenuation(lane1, lane2);
  if (a == 0.0 || cfg.gamma == 0.0) return 0.0;
  return cfg.gamma * a * heaviside(r + cfg.a1, cfg.b1, cfg.eps) *
         heaviside(-r + cfg.a2, cfg.b2, cfg.eps);
}

double interaction_strength_deriv(double r, int lane1, int lane2, const InteractionConfig& cfg) {
  const double a = lateral_attenuation(lane1, lane2);
  if (a == 0.0 || cfg.gamma == 0.0) return 0.0;
  const double h1 = heaviside(r + cfg.a1, cfg.b1, cfg.eps);
  const double h2 = heaviside(-r + cfg.a2, cfg.b2, cfg.eps);
  return cfg.gamma * a *
         (heaviside_deriv(r + cfg.a1, cfg.b1, cfg.eps) * h2 -
          h1 * heaviside_deriv(-r + cfg.a2, cfg.b2, cfg.eps));
}

double distance_gap(double y1, double y2, double v1, double v2, double th1, double th2,
                    double c1, double c2) {
  double gap = (y2 - y1) * 0.5 * (v1 + v2);
  const double csum = c1 + c2;
  if (csum > kMinCurvatureSum) {
    gap += (th1 - th2) * 2.0 / csum;
  }
  return gap;
}

namespace detail {

double log_heaviside(double r, double k, double eps) {
  const double t = 2.0 * k * (r + eps);
  // log(1/(1+e^-t)) = -log1p(e^-t)
  if (t > 37.0) return -std::exp(-t);
  if (t < -37.0) return t;
  return -std::log1p(std::exp(-t));
}

double overtake_log_factor(double r_prev, double r_cur, const InteractionConfig& cfg,
                           double* d_prev, double* d_cur) {
  const double prod = r_prev * r_cur;
  const double den = std::abs(r_prev) * std::abs(r_cur) + kSignFloor;
  const double p = prod / den;

  const double k = cfg.inhibition_sharpness;
  const double logh = log_heaviside(p, k, cfg.eps);
  if (d_prev || d_cur) {
    // d log H / dp = 2k (1 - H)
    const double t = 2.0 * k * (p + cfg.eps);
    double one_minus_h;
    if (t > 37.0) {
      one_minus_h = std::exp(-t);
    } else if (t < -37.0) {
      one_minus_h = 1.0;
    } else {
      one_minus_h = 1.0 / (1.0 + std::exp(t));
    }
    const double dlogh_dp = 2.0 * k * one_minus_h;
    const double dp_dprev = r_cur * kSignFloor / (den * den);
    const double dp_dcur = r_prev * kSignFloor / (den * den);
    if (d_prev) *d_prev = dlogh_dp * dp_dprev;
    if (d_cur) *d_cur = dlogh_dp * dp_dcur;
  }
  return logh;
}

}  // namespace detail

double inhibition(std::span<const double> gap_window, const InteractionConfig& cfg) {
  if (gap_window.size() < 2) return 1.0;
  double log_sum = 0.0;
  for (std::size_t i = 1; i < gap_window.size(); ++i) {
    log_sum += detail::overtake_log_factor(gap_window[i - 1], gap_window[i], cfg);
  }
  return std::exp(log_sum);
}

}  // namespace trackpace
