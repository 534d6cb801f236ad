#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace trackpace {

inline constexpr int kNumLanes = 8;
inline constexpr double kLaneWidth = 1.22;      // meters between lane lines
inline constexpr double kRunningOffset = 0.30;  // running line offset from the inner lane limit

enum class TrackKind { Standard, DoubleBend, Clothoid, Straight };
enum class SegmentKind { CircularArc, ClothoidArc, StraightLine };

/// One piece of the lane-1 running line. Arc segments carry the construction
/// radius (running radius minus the 0.30 m offset) and the swept angle.
struct Segment {
  SegmentKind kind;
  double s_start = 0.0;
  double s_end = 0.0;
  double construction_radius = 0.0;  // arcs only; for clothoids, the radius of the circle they join
  double sweep_angle = 0.0;          // radians, arcs only
};

struct LaneGeometry {
  int lane = 1;
  double lane_offset = 0.0;                    // 1.22 * (lane - 1)
  double running_offset = kRunningOffset;
  double stagger_angle = 0.0;                  // radians
};

struct ArcSpec {
  double construction_radius = 0.0;  // meters, as published in track tables
  double sweep = 0.0;                // radians, total angle covered by this circle class
};

/// Geometric description of the raced course. Distances s are measured along
/// the running line of each lane from the staggered start, so every lane covers
/// exactly `distance()` meters. Queries are pure and the object is immutable
/// after construction, so it can be shared freely across threads.
class Track {
 public:
  static Track standard(double straight_length, double distance);
  static Track double_bend(double straight_length, ArcSpec outer, ArcSpec inner, double distance);
  static Track clothoid(double straight_length, double junction_length, double distance);
  static Track straight_track(double distance);

  /// Built-in shapes: STD, DB1, DB2, CL1, CL2, STRAIGHT.
  static Track preset(std::string_view name);
  static const std::vector<std::string>& preset_names();
  static Track from_json(const nlohmann::json& spec);

  TrackKind kind() const { return kind_; }
  double distance() const { return distance_; }
  double straight_length() const { return straight_length_; }
  double junction_length() const { return junction_length_; }

  /// Lane-1 running-line segments, strictly increasing, partitioning [0, distance].
  const std::vector<Segment>& segments() const { return segments_; }

  LaneGeometry lane_geometry(int lane) const;

  /// Curvature of lane `lane` at distance s; 0 on straights.
  double curvature(int lane, double s) const;

  /// Angular position on the curved part; equals pi everywhere on the straight.
  /// Continuous and monotone nondecreasing in s.
  double angular_position(int lane, double s) const;

  /// Staggered-start angle. For double-bend shapes this is the conventional
  /// published value mu_k * pi / R_outer; the continuous angular profile of the
  /// outer lanes starts slightly below it so that it reaches pi exactly at the
  /// curve exit.
  double stagger_angle(int lane) const;

  const std::string& name() const { return name_; }

 private:
  Track() = default;

  // Piecewise-affine curvature description of one lane. Pieces cover
  // [s_start, s_end]; theta_start anchors the analytically integrated angle.
  struct LanePiece {
    double s_start = 0.0;
    double s_end = 0.0;
    double c_start = 0.0;
    double c_end = 0.0;
    double theta_start = 0.0;
  };

  void build_lane_tables();
  const LanePiece& piece_at(int lane, double s) const;
  void check_lane(int lane) const;
  void check_s(double s) const;

  TrackKind kind_ = TrackKind::Straight;
  double distance_ = 0.0;
  double straight_length_ = 0.0;
  double junction_length_ = 0.0;
  std::string name_;
  std::vector<Segment> segments_;
  std::array<std::vector<LanePiece>, kNumLanes> lane_pieces_;
  std::array<double, kNumLanes> stagger_{};
};

inline double deg2rad(double deg) { return deg * 3.14159265358979323846 / 180.0; }

}  // namespace trackpace
