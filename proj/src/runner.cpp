#include "trackpace/runner.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace trackpace {

const std::vector<std::string>& RunnerParams::preset_names() {
  static const std::vector<std::string> names = {"A1", "A2", "A3"};
  return names;
}

RunnerParams RunnerParams::preset(std::string_view name) {
  RunnerParams p;
  if (name == "A1") {
    p = {1.18, 1500.0, 9.45, 0.43, 0.015, 20.0};
  } else if (name == "A2") {
    p = {0.85, 2160.0, 13.0, 0.43, 0.015, 20.0};
  } else if (name == "A3") {
    p = {1.7, 1000.0, 6.5, 0.43, 0.015, 20.0};
  } else {
    throw std::invalid_argument("unknown runner preset: " + std::string(name));
  }
  p.validate();
  return p;
}

RunnerParams RunnerParams::from_json(const nlohmann::json& spec) {
  if (spec.is_string()) return preset(spec.get<std::string>());
  RunnerParams p;
  if (spec.contains("preset")) p = preset(spec.at("preset").get<std::string>());
  p.tau = spec.value("tau", p.tau);
  p.e0 = spec.value("e0", p.e0);
  p.f_max = spec.value("f_max", p.f_max);
  p.z0 = spec.value("z0", p.z0);
  p.u_max = spec.value("u_max", p.u_max);
  p.sigma_f = spec.value("sigma_f", p.sigma_f);
  p.validate();
  return p;
}

void RunnerParams::validate() const {
  if (!(tau > 0.0) || !(e0 > 0.0) || !(f_max > 0.0) || !(z0 > 0.0) || !(u_max > 0.0) ||
      !(sigma_f > 0.0)) {
    throw std::invalid_argument("runner parameters must be strictly positive");
  }
  if (!(f_max * tau > 1.0 / z0)) {
    throw std::invalid_argument("runner cannot accelerate from the start: f_max * tau <= v0");
  }
}

double sigma(double e, const RunnerParams& p) {
  // Clamp the depleted side so transcription iterates stay well defined; above
  // e0 the variable bounds already apply and the linear form extends smoothly.
  const double clamped = std::max(e, 0.0);
  return p.sigma_f * (p.e0 - clamped) / p.e0;
}

RaceState state_rhs(const RaceState& state, double u, const RunnerParams& p,
                    double friction_scale) {
  RaceState d;
  const double z = state.z;
  d.y = z;
  d.z = z * z / p.tau * friction_scale - state.f * z * z * z;
  d.e = sigma(state.e, p) * z - state.f;
  d.f = u;
  return d;
}

double max_tangential_force(double z, double curvature, double f_max) {
  const double v2 = 1.0 / (z * z);
  const double centripetal = curvature * v2 * v2 * curvature;  // c^2 v^4
  const double margin = f_max * f_max - centripetal;
  if (margin < 0.0) {
    throw std::domain_error("speed infeasible for this curvature: f_max^2 < c^2 v^4");
  }
  return std::sqrt(margin);
}

double equilibrium_speed(double radius, const RunnerParams& p) {
  const double vs = p.f_max * p.tau;
  if (std::isinf(radius)) return vs;
  if (!(radius > 0.0)) throw std::invalid_argument("equilibrium_speed: radius must be positive");
  // v^2 = (-R^2 + R sqrt(R^2 + 4 vs^2 tau^2)) / (2 tau^2), written in the
  // cancellation-free conjugate form.
  const double r2 = radius * radius;
  const double t2 = p.tau * p.tau;
  const double v2 = 2.0 * radius * vs * vs / (radius + std::sqrt(r2 + 4.0 * vs * vs * t2));
  return std::sqrt(v2);
}

double lean_angle(double v, double radius) {
  if (std::isinf(radius)) return 0.0;
  if (!(radius > 0.0)) throw std::invalid_argument("lean_angle: radius must be positive");
  return std::atan(v * v / (radius * PhysConstants::g));
}

double ground_reaction(double v, double radius) {
  const double g = PhysConstants::g;
  if (std::isinf(radius)) return g;
  if (!(radius > 0.0)) throw std::invalid_argument("ground_reaction: radius must be positive");
  const double a = v * v / radius;
  return std::sqrt(g * g + a * a);
}

namespace {

double interp_force(std::span<const double> s_nodes, std::span<const double> f_nodes, double s) {
  const std::size_t n = s_nodes.size();
  if (s <= s_nodes.front()) return f_nodes.front();
  if (s >= s_nodes.back()) return f_nodes.back();
  std::size_t lo = 0, hi = n - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (s_nodes[mid] <= s) lo = mid; else hi = mid;
  }
  const double w = (s - s_nodes[lo]) / (s_nodes[hi] - s_nodes[lo]);
  return f_nodes[lo] + w * (f_nodes[hi] - f_nodes[lo]);
}

}  // namespace

ForwardSimResult simulate_forward(const Track& track, int lane, const RunnerParams& p,
                                  std::span<const double> s_nodes,
                                  std::span<const double> f_nodes, int refine) {
  if (s_nodes.size() != f_nodes.size() || s_nodes.size() < 2) {
    throw std::invalid_argument("simulate_forward: need matching s/f arrays with >= 2 nodes");
  }
  if (refine < 1) throw std::invalid_argument("simulate_forward: refine must be >= 1");

  const std::size_t n_fine = (s_nodes.size() - 1) * static_cast<std::size_t>(refine) + 1;
  std::vector<double> s(n_fine), y(n_fine), z(n_fine), e(n_fine), f(n_fine);

  auto rhs = [&](double zc, double ec, double fc) {
    RaceState st{0.0, zc, ec, fc};
    return state_rhs(st, 0.0, p);
  };

  ForwardSimResult out;
  double yc = 0.0, zc = p.z0, ec = p.e0;
  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < s_nodes.size(); ++i) {
    const double h = (s_nodes[i + 1] - s_nodes[i]) / refine;
    for (int j = 0; j < refine; ++j) {
      const double sc = s_nodes[i] + h * j;
      const double fc = interp_force(s_nodes, f_nodes, sc);
      s[k] = sc; y[k] = yc; z[k] = zc; e[k] = ec; f[k] = fc;

      // Reporting thresholds leave room for the discretization gap between the
      // transcribed solution and this finer re-integration.
      if (!out.energy_violation_s && ec < -1e-3 * p.e0) out.energy_violation_s = sc;
      const double c = track.curvature(lane, sc);
      const double v2 = 1.0 / (zc * zc);
      if (!out.force_violation_s &&
          fc * fc + c * c * v2 * v2 > p.f_max * p.f_max * (1.0 + 1e-3)) {
        out.force_violation_s = sc;
      }

      const double fm = interp_force(s_nodes, f_nodes, sc + 0.5 * h);
      const double fe = interp_force(s_nodes, f_nodes, sc + h);
      const RaceState k1 = rhs(zc, ec, fc);
      const RaceState k2 = rhs(zc + 0.5 * h * k1.z, ec + 0.5 * h * k1.e, fm);
      const RaceState k3 = rhs(zc + 0.5 * h * k2.z, ec + 0.5 * h * k2.e, fm);
      const RaceState k4 = rhs(zc + h * k3.z, ec + h * k3.e, fe);
      yc += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
      zc += h / 6.0 * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
      ec += h / 6.0 * (k1.e + 2.0 * k2.e + 2.0 * k3.e + k4.e);
      ++k;
    }
  }
  s[k] = s_nodes.back(); y[k] = yc; z[k] = zc; e[k] = ec; f[k] = f_nodes.back();

  out.trajectory = make_trajectory(track, lane, p, s, y, z, e, f);
  return out;
}

}  // namespace trackpace
