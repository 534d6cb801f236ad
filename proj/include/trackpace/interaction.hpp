#pragma once

#include <span>

#include <nlohmann/json_fwd.hpp>

namespace trackpace {

/// Parameters of the two-runner psychological coupling.
struct InteractionConfig {
  double gamma = 0.04;   // peak friction reduction; 0 disables the coupling
  double a1 = 2.0;       // plateau offsets, meters
  double a2 = -0.25;
  double b1 = 3.0;       // sigmoid slopes, 1/m
  double b2 = 10.0;
  double eps = 1e-6;     // sigmoid shift
  double eta = 20.0;     // inhibition window after an overtaking, meters
  double inhibition_sharpness = 10.0;  // slope of the smoothed overtaking detector

  static InteractionConfig from_json(const nlohmann::json& spec);
  void validate() const;
};

/// Smoothed Heaviside step: (1 + exp(-2k(r + eps)))^-1.
double heaviside(double r, double k, double eps);

/// d heaviside / dr.
double heaviside_deriv(double r, double k, double eps);

/// Lateral attenuation: 0 for lanes 4 or more apart, else 1 - |k1-k2|/10.
double lateral_attenuation(int lane1, int lane2);

/// Benefit F(r) felt by a runner trailing by -r meters: a plateau of height
/// gamma * A on roughly r in (-2, -0.25), zero elsewhere.
double interaction_strength(double r, int lane1, int lane2, const InteractionConfig& cfg);

/// dF/dr.
double interaction_strength_deriv(double r, int lane1, int lane2, const InteractionConfig& cfg);

/// Signed gap between two runners at the same raced distance: positive when
/// runner 1 is ahead at time y1(s). The angular term is defined as 0 when both
/// runners are on straights (c1 + c2 = 0).
double distance_gap(double y1, double y2, double v1, double v2, double th1, double th2,
                    double c1, double c2);

/// Inhibition indicator over a window of gap samples covering [s - eta, s]:
/// close to 1 when the gap kept its sign, close to 0 after any sign change.
/// An empty or single-sample window yields 1.
double inhibition(std::span<const double> gap_window, const InteractionConfig& cfg);

namespace detail {

/// log H applied to the sign of r_prev * r_cur (the product is normalized by
/// |r_prev||r_cur| so the detector is invariant to rescaling the gap history).
/// Optionally returns the partial derivatives with respect to the two samples.
double overtake_log_factor(double r_prev, double r_cur, const InteractionConfig& cfg,
                           double* d_prev = nullptr, double* d_cur = nullptr);

/// log of heaviside(r, k, eps), saturation-safe.
double log_heaviside(double r, double k, double eps);

}  // namespace detail

}  // namespace trackpace
