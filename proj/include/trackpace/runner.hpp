#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

#include "trackpace/track.hpp"
#include "trackpace/trajectory.hpp"

namespace trackpace {

struct PhysConstants {
  static constexpr double g = 9.81;  // m/s^2
};

/// Physiological constants, per unit of body mass.
struct RunnerParams {
  double tau = 1.18;      // friction time constant, s
  double e0 = 1500.0;     // initial anaerobic energy, m^2/s^2
  double f_max = 9.45;    // maximal propulsive force, N/kg
  double z0 = 0.43;       // initial inverse speed, s/m
  double u_max = 0.015;   // bound on |df/ds|, N/kg per m
  double sigma_f = 20.0;  // aerobic power at full deficit, m^2/s^3

  /// Built-in athletes: A1, A2, A3.
  static RunnerParams preset(std::string_view name);
  static const std::vector<std::string>& preset_names();
  static RunnerParams from_json(const nlohmann::json& spec);

  void validate() const;  // throws std::invalid_argument on nonsense
};

struct RaceState {
  double y = 0.0;  // elapsed time at distance s, seconds
  double z = 0.0;  // inverse speed, s/m
  double e = 0.0;  // anaerobic energy remaining
  double f = 0.0;  // tangential propulsive force, N/kg
};

/// Aerobic power as a function of the remaining anaerobic energy. The argument
/// is clamped to [0, e0] so that transcription iterates stay well defined.
double sigma(double e, const RunnerParams& p);

/// Distance-domain equations of motion: d(y,z,e,f)/ds for control u = df/ds.
/// friction_scale multiplies the z^2/tau term; it is 1 for a lone runner and
/// (1 - I*F) under the two-runner coupling.
RaceState state_rhs(const RaceState& state, double u, const RunnerParams& p,
                    double friction_scale = 1.0);

/// Largest admissible tangential force at inverse speed z and curvature c:
/// sqrt(f_max^2 - c^2/z^4). Throws std::domain_error when the speed itself is
/// infeasible for this curvature.
double max_tangential_force(double z, double curvature, double f_max);

/// Mid-race saturated speed on a bend of radius R (pass +infinity for a
/// straight, where it reduces to f_max * tau).
double equilibrium_speed(double radius, const RunnerParams& p);

/// Lean angle against the vertical needed to balance the bend.
double lean_angle(double v, double radius);

/// Ground reaction per unit mass, sqrt(g^2 + v^4/R^2).
double ground_reaction(double v, double radius);

struct ForwardSimResult {
  Trajectory trajectory;
  std::optional<double> energy_violation_s;  // first s where e dips below 0
  std::optional<double> force_violation_s;   // first s where f^2 + c^2 v^4 > f_max^2
};

/// Integrates the equations of motion with classical RK4 on a grid `refine`
/// times finer than the given force profile (linear interpolation between
/// nodes). Serves as the independent check on transcribed solutions.
ForwardSimResult simulate_forward(const Track& track, int lane, const RunnerParams& p,
                                  std::span<const double> s_nodes,
                                  std::span<const double> f_nodes, int refine = 4);

}  // namespace trackpace
