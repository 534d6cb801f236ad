#include "trackpace/trajectory.hpp"

#include <cmath>
#include <stdexcept>

#include "trackpace/runner.hpp"
#include "trackpace/track.hpp"

namespace trackpace {

namespace {

// Linear interpolation of y(s) between samples, used for the split marks.
double time_at(std::span<const double> s, std::span<const double> y, double mark) {
  if (mark <= s.front()) return y.front();
  if (mark >= s.back()) return y.back();
  std::size_t lo = 0, hi = s.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (s[mid] <= mark) lo = mid; else hi = mid;
  }
  const double w = (mark - s[lo]) / (s[hi] - s[lo]);
  return y[lo] + w * (y[hi] - y[lo]);
}

}  // namespace

Trajectory make_trajectory(const Track& track, int lane, const RunnerParams& p,
                           std::span<const double> s_nodes, std::span<const double> y,
                           std::span<const double> z, std::span<const double> e,
                           std::span<const double> f) {
  const std::size_t n = s_nodes.size();
  if (y.size() != n || z.size() != n || e.size() != n || f.size() != n || n < 2) {
    throw std::invalid_argument("make_trajectory: inconsistent state arrays");
  }

  Trajectory traj;
  traj.lane = lane;
  traj.points.resize(n);
  const double g = PhysConstants::g;
  double aerobic = 0.0;  // integral of sigma(e) z ds
  for (std::size_t i = 0; i < n; ++i) {
    TrajectoryPoint& pt = traj.points[i];
    pt.s = s_nodes[i];
    pt.t = y[i];
    pt.v = 1.0 / z[i];
    pt.f = f[i];
    pt.e = e[i];
    pt.curvature = track.curvature(lane, s_nodes[i]);
    pt.theta = track.angular_position(lane, s_nodes[i]);
    const double cv2 = pt.curvature * pt.v * pt.v;
    pt.f_total = std::sqrt(f[i] * f[i] + g * g + cv2 * cv2);
    if (i > 0) {
      const double ds = s_nodes[i] - s_nodes[i - 1];
      aerobic += 0.5 * ds * (sigma(e[i - 1], p) * z[i - 1] + sigma(e[i], p) * z[i]);
    }
  }
  traj.final_time = y.back();

  for (double mark = 50.0; mark < s_nodes.back() + 1e-9; mark += 50.0) {
    const double hi = std::min(mark, s_nodes.back());
    traj.splits.push_back(time_at(s_nodes, y, hi) - time_at(s_nodes, y, hi - 50.0));
  }

  const double spent = p.e0 - e.back();
  const double total = spent + aerobic;
  traj.anaerobic_fraction = total > 0.0 ? spent / total : 0.0;
  return traj;
}

}  // namespace trackpace
