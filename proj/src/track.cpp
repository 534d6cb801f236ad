#include "trackpace/track.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace trackpace {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Figure dimensions are rounded to the millimeter; the builder snaps the
// straight so that the lane-1 running line closes to the race distance exactly.
constexpr double kLengthSnapTol = 1e-2;

double lane_offset(int lane) { return kLaneWidth * (lane - 1); }

}  // namespace

Track Track::standard(double straight_length, double distance) {
  if (!(straight_length > 0.0) || !(straight_length < distance)) {
    throw std::invalid_argument("standard track: straight length must lie in (0, distance)");
  }
  Track t;
  t.kind_ = TrackKind::Standard;
  t.distance_ = distance;
  t.straight_length_ = straight_length;
  t.name_ = "standard";

  const double lc = distance - straight_length;
  const double r1 = lc / kPi;

  t.segments_.push_back({SegmentKind::CircularArc, 0.0, lc, r1 - kRunningOffset, kPi});
  t.segments_.push_back({SegmentKind::StraightLine, lc, distance, 0.0, 0.0});

  for (int lane = 1; lane <= kNumLanes; ++lane) {
    const double rk = r1 + lane_offset(lane);
    auto& pieces = t.lane_pieces_[lane - 1];
    pieces.push_back({0.0, lc, 1.0 / rk, 1.0 / rk, 0.0});
    pieces.push_back({lc, distance, 0.0, 0.0, 0.0});
    t.stagger_[lane - 1] = lane_offset(lane) * kPi / rk;
  }
  t.build_lane_tables();
  return t;
}

Track Track::double_bend(double straight_length, ArcSpec outer, ArcSpec inner, double distance) {
  if (outer.construction_radius <= 0.0 || inner.construction_radius <= 0.0) {
    throw std::invalid_argument("double bend: radii must be positive");
  }
  if (outer.sweep <= 0.0 || inner.sweep <= 0.0 ||
      std::abs(outer.sweep + inner.sweep - kPi) > 1e-9) {
    throw std::invalid_argument("double bend: circle sweeps must sum to pi");
  }
  const double ro = outer.construction_radius + kRunningOffset;  // running radii, lane 1
  const double ri = inner.construction_radius + kRunningOffset;
  const double phi_o = outer.sweep / 2.0;  // each of the two outer arcs
  const double phi_i = inner.sweep;

  const double lc = 2.0 * ro * phi_o + ri * phi_i;
  const double snapped_straight = distance - lc;
  if (std::abs(snapped_straight - straight_length) > kLengthSnapTol) {
    throw std::invalid_argument("double bend: lane-1 path length does not close to the race distance");
  }
  if (snapped_straight <= 0.0) {
    throw std::invalid_argument("double bend: curved part exceeds the race distance");
  }

  Track t;
  t.kind_ = TrackKind::DoubleBend;
  t.distance_ = distance;
  t.straight_length_ = snapped_straight;
  t.name_ = "double_bend";

  const double s1_lane1 = ro * phi_o;
  const double s2_lane1 = s1_lane1 + ri * phi_i;
  t.segments_.push_back({SegmentKind::CircularArc, 0.0, s1_lane1, outer.construction_radius, phi_o});
  t.segments_.push_back({SegmentKind::CircularArc, s1_lane1, s2_lane1, inner.construction_radius, phi_i});
  t.segments_.push_back({SegmentKind::CircularArc, s2_lane1, lc, outer.construction_radius, phi_o});
  t.segments_.push_back({SegmentKind::StraightLine, lc, distance, 0.0, 0.0});

  for (int lane = 1; lane <= kNumLanes; ++lane) {
    const double mu = lane_offset(lane);
    const double s1 = lc - (ro + mu) * phi_o - (ri + mu) * phi_i;
    const double s2 = lc - (ro + mu) * phi_o;
    if (s1 <= 0.0) {
      throw std::invalid_argument("double bend: staggered start leaves the first outer arc");
    }
    const double co = 1.0 / (ro + mu);
    const double ci = 1.0 / (ri + mu);
    auto& pieces = t.lane_pieces_[lane - 1];
    pieces.push_back({0.0, s1, co, co, 0.0});
    pieces.push_back({s1, s2, ci, ci, 0.0});
    pieces.push_back({s2, lc, co, co, 0.0});
    pieces.push_back({lc, distance, 0.0, 0.0, 0.0});
    t.stagger_[lane - 1] = mu * kPi / ro;
  }
  t.build_lane_tables();
  return t;
}

Track Track::clothoid(double straight_length, double junction_length, double distance) {
  if (junction_length < 0.0) {
    throw std::invalid_argument("clothoid track: junction length must be nonnegative");
  }
  if (!(straight_length > 0.0) || straight_length + 2.0 * junction_length >= distance) {
    throw std::invalid_argument("clothoid track: straight plus junctions must be shorter than the distance");
  }
  Track t;
  t.kind_ = TrackKind::Clothoid;
  t.distance_ = distance;
  t.straight_length_ = straight_length;
  t.junction_length_ = junction_length;
  t.name_ = "clothoid";

  const double lbar = junction_length;
  const double r = (distance - straight_length - lbar) / kPi;
  const double lc1 = r * kPi - lbar;        // lane-1 circular length
  const double curved = distance - straight_length;  // raced curve, equal on every lane

  if (lbar > 0.0) {
    t.segments_.push_back(
        {SegmentKind::ClothoidArc, 0.0, lbar, r - kRunningOffset, lbar / (2.0 * r)});
  }
  t.segments_.push_back(
      {SegmentKind::CircularArc, lbar, lbar + lc1, r - kRunningOffset, lc1 / r});
  if (lbar > 0.0) {
    t.segments_.push_back(
        {SegmentKind::ClothoidArc, lbar + lc1, curved, r - kRunningOffset, lbar / (2.0 * r)});
  }
  t.segments_.push_back({SegmentKind::StraightLine, curved, distance, 0.0, 0.0});

  for (int lane = 1; lane <= kNumLanes; ++lane) {
    const double mu = lane_offset(lane);
    const double rk = r + mu;
    const double ck = 1.0 / rk;
    const double factor = 1.0 + mu / r;
    const double lk2 = lbar * factor;   // trailing junction, full length
    const double lck = lc1 * factor;    // lane-k circular length
    const double lk1 = curved - lck - lk2;  // leading junction left after the staggered start

    auto& pieces = t.lane_pieces_[lane - 1];
    double cursor = 0.0;
    if (lk1 > 0.0) {
      // Start partway along the entry junction: curvature ramps from its
      // staggered value up to the circle.
      const double c0 = ck * (lk2 - lk1) / lk2;
      pieces.push_back({cursor, cursor + lk1, c0, ck, 0.0});
      cursor += lk1;
      pieces.push_back({cursor, cursor + lck, ck, ck, 0.0});
      cursor += lck;
    } else {
      // The staggered start falls beyond the entry junction, inside the circle.
      const double circ = lck + lk1;
      if (circ <= 0.0) {
        throw std::invalid_argument("clothoid track: staggered start falls beyond the circular part");
      }
      pieces.push_back({cursor, circ, ck, ck, 0.0});
      cursor = circ;
    }
    if (lk2 > 0.0) {
      pieces.push_back({cursor, cursor + lk2, ck, 0.0, 0.0});
      cursor += lk2;
    }
    pieces.push_back({cursor, distance, 0.0, 0.0, 0.0});
  }
  t.build_lane_tables();
  for (int lane = 1; lane <= kNumLanes; ++lane) {
    t.stagger_[lane - 1] = t.lane_pieces_[lane - 1].front().theta_start;
  }
  return t;
}

Track Track::straight_track(double distance) {
  if (!(distance > 0.0)) throw std::invalid_argument("straight track: distance must be positive");
  Track t;
  t.kind_ = TrackKind::Straight;
  t.distance_ = distance;
  t.straight_length_ = distance;
  t.name_ = "straight";
  t.segments_.push_back({SegmentKind::StraightLine, 0.0, distance, 0.0, 0.0});
  for (int lane = 1; lane <= kNumLanes; ++lane) {
    t.lane_pieces_[lane - 1].push_back({0.0, distance, 0.0, 0.0, kPi});
    t.stagger_[lane - 1] = 0.0;
  }
  return t;
}

void Track::build_lane_tables() {
  // Anchor the angular position so that the curve exit lands on pi exactly,
  // then integrate the piecewise-affine curvature backwards.
  for (auto& pieces : lane_pieces_) {
    double theta_end = kPi;
    for (auto it = pieces.rbegin(); it != pieces.rend(); ++it) {
      const double len = it->s_end - it->s_start;
      const double sweep = 0.5 * (it->c_start + it->c_end) * len;
      it->theta_start = theta_end - sweep;
      theta_end = it->theta_start;
    }
  }
}

const std::vector<std::string>& Track::preset_names() {
  static const std::vector<std::string> names = {"STD", "DB1", "DB2", "CL1", "CL2", "STRAIGHT"};
  return names;
}

Track Track::preset(std::string_view name) {
  Track t;
  if (name == "STD") {
    t = standard(84.39, 200.0);
  } else if (name == "DB1") {
    t = double_bend(79.996, {34.00, deg2rad(140.0)}, {51.543, deg2rad(40.0)}, 200.0);
  } else if (name == "DB2") {
    t = double_bend(98.52, {24.00, deg2rad(120.0)}, {48.00, deg2rad(60.0)}, 200.0);
  } else if (name == "CL1") {
    t = clothoid(84.39, 10.0, 200.0);
  } else if (name == "CL2") {
    t = clothoid(84.39, 30.0, 200.0);
  } else if (name == "STRAIGHT") {
    t = straight_track(200.0);
  } else {
    throw std::invalid_argument("unknown track preset: " + std::string(name));
  }
  t.name_ = std::string(name);
  return t;
}

Track Track::from_json(const nlohmann::json& spec) {
  if (spec.is_string()) return preset(spec.get<std::string>());
  if (spec.contains("preset")) return preset(spec.at("preset").get<std::string>());

  const std::string kind = spec.at("kind").get<std::string>();
  const double d = spec.value("distance", 200.0);
  if (kind == "standard") {
    return standard(spec.at("straight_length").get<double>(), d);
  }
  if (kind == "double_bend") {
    const auto& segs = spec.at("segments");
    if (!segs.is_array() || segs.size() != 2) {
      throw std::invalid_argument("double_bend spec needs segments [outer, inner]");
    }
    ArcSpec outer{segs[0].at("radius_construction").get<double>(),
                  deg2rad(segs[0].at("sweep_deg").get<double>())};
    ArcSpec inner{segs[1].at("radius_construction").get<double>(),
                  deg2rad(segs[1].at("sweep_deg").get<double>())};
    return double_bend(spec.at("straight_length").get<double>(), outer, inner, d);
  }
  if (kind == "clothoid") {
    return clothoid(spec.at("straight_length").get<double>(),
                    spec.at("junction_length").get<double>(), d);
  }
  if (kind == "straight") {
    return straight_track(d);
  }
  throw std::invalid_argument("unknown track kind: " + kind);
}

LaneGeometry Track::lane_geometry(int lane) const {
  check_lane(lane);
  return {lane, lane_offset(lane), kRunningOffset, stagger_[lane - 1]};
}

void Track::check_lane(int lane) const {
  if (lane < 1 || lane > kNumLanes) {
    throw std::out_of_range("lane must be in 1..8");
  }
}

void Track::check_s(double s) const {
  if (!(s >= 0.0) || !(s <= distance_ + 1e-12)) {
    throw std::out_of_range("distance s outside the race");
  }
}

const Track::LanePiece& Track::piece_at(int lane, double s) const {
  const auto& pieces = lane_pieces_[lane - 1];
  for (const auto& p : pieces) {
    if (s <= p.s_end) return p;
  }
  return pieces.back();
}

double Track::curvature(int lane, double s) const {
  check_lane(lane);
  check_s(s);
  const LanePiece& p = piece_at(lane, s);
  if (p.c_start == p.c_end) return p.c_start;
  const double len = p.s_end - p.s_start;
  return p.c_start + (p.c_end - p.c_start) * (s - p.s_start) / len;
}

double Track::angular_position(int lane, double s) const {
  check_lane(lane);
  check_s(s);
  const LanePiece& p = piece_at(lane, s);
  const double ds = s - p.s_start;
  if (p.c_start == p.c_end) return p.theta_start + p.c_start * ds;
  const double len = p.s_end - p.s_start;
  return p.theta_start + p.c_start * ds + 0.5 * (p.c_end - p.c_start) * ds * ds / len;
}

double Track::stagger_angle(int lane) const {
  check_lane(lane);
  return stagger_[lane - 1];
}

}  // namespace trackpace
