#pragma once

#include <span>
#include <vector>

namespace trackpace {

class Track;
struct RunnerParams;

struct TrajectoryPoint {
  double s = 0.0;
  double t = 0.0;
  double v = 0.0;
  double f = 0.0;
  double e = 0.0;
  double f_total = 0.0;   // sqrt(f^2 + g^2 + v^4 c^2)
  double curvature = 0.0;
  double theta = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  int lane = 1;
  double final_time = 0.0;
  std::vector<double> splits;          // time per 50 m section
  double anaerobic_fraction = 0.0;     // (e0 - e(T)) / total energy spent
};

/// Assembles a trajectory from state arrays sampled at s_nodes, filling in the
/// derived columns, the 50 m splits and the energy summary.
Trajectory make_trajectory(const Track& track, int lane, const RunnerParams& p,
                           std::span<const double> s_nodes, std::span<const double> y,
                           std::span<const double> z, std::span<const double> e,
                           std::span<const double> f);

}  // namespace trackpace
