#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "teer/hull.hpp"
#include "teer/kinematics.hpp"

namespace teer {

enum class Segment { a1p1, a2p2, a3p3 };

constexpr std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::a1p1: return "a1p1";
    case Segment::a2p2: return "a2p2";
    case Segment::a3p3: return "a3p3";
  }
  return "?";
}

inline Segment segment_from_string(std::string_view s) {
  if (s == "a1p1" || s == "A1P1") return Segment::a1p1;
  if (s == "a2p2" || s == "A2P2") return Segment::a2p2;
  if (s == "a3p3" || s == "A3P3") return Segment::a3p3;
  throw std::invalid_argument("unknown leaflet segment '" + std::string(s) + "'");
}

// Curve parameter of the segment midpoint.
constexpr double segment_midpoint(Segment s) {
  switch (s) {
    case Segment::a1p1: return 1.0 / 6.0;
    case Segment::a2p2: return 0.5;
    case Segment::a3p3: return 5.0 / 6.0;
  }
  return 0.5;
}

constexpr Segment segment_at(double s) {
  if (s < 1.0 / 3.0) return Segment::a1p1;
  if (s < 2.0 / 3.0) return Segment::a2p2;
  return Segment::a3p3;
}

// Mitral valve phantom. All geometry is expressed in `frame`: origin at the annulus
// center, +z along the valve axis pointing into the atrium, annulus plane z = 0.
// The coaptation line is a circular arc whose chord runs along local x at y = chord_y,
// bulging towards +y; s = 0 at the -x end.
struct ValvePhantom {
  Pose frame;
  double annulus_semi_x = 19.0;  // mm
  double annulus_semi_y = 15.0;  // mm
  double chord = 30.0;           // mm
  double sagitta = 4.0;          // mm
  double chord_y = -2.0;         // mm
  double atrium_radius = 50.0;   // mm, hemisphere above the annulus plane

  double arc_radius() const { return (chord * chord / 4.0 + sagitta * sagitta) / (2.0 * sagitta); }
  double half_angle() const { return std::asin(chord / (2.0 * arc_radius())); }
  double arc_length() const { return 2.0 * arc_radius() * half_angle(); }
  Eigen::Vector2d arc_center() const { return {0.0, chord_y + sagitta - arc_radius()}; }

  double angle_at(double s) const { return std::numbers::pi / 2.0 + half_angle() * (1.0 - 2.0 * s); }

  // Point on the coaptation line, local frame, in the annulus plane.
  Eigen::Vector2d point_at(double s) const {
    const double a = angle_at(s);
    return arc_center() + arc_radius() * Eigen::Vector2d(std::cos(a), std::sin(a));
  }

  // In-plane unit vector perpendicular to the coaptation line at s.
  Eigen::Vector2d perpendicular_at(double s) const {
    const double a = angle_at(s);
    return {std::cos(a), std::sin(a)};
  }

  // Curve parameter of the point on the coaptation line nearest to q (local, in-plane).
  double nearest_parameter(const Eigen::Vector2d& q) const {
    const Eigen::Vector2d d = q - arc_center();
    if (d.norm() > 0.0) {
      const double phi = std::atan2(d.y(), d.x());
      const double s = (std::numbers::pi / 2.0 + half_angle() - phi) / (2.0 * half_angle());
      if (s >= 0.0 && s <= 1.0) return s;
    }
    return (q - point_at(0.0)).squaredNorm() <= (q - point_at(1.0)).squaredNorm() ? 0.0 : 1.0;
  }

  bool inside_annulus(const Eigen::Vector2d& q) const {
    return (q.x() / annulus_semi_x) * (q.x() / annulus_semi_x) + (q.y() / annulus_semi_y) * (q.y() / annulus_semi_y) <=
           1.0;
  }

  bool inside_atrium(const Eigen::Vector3d& world) const {
    const Eigen::Vector3d p = frame.inverse().transform(world);
    return p.z() >= 0.0 && p.norm() <= atrium_radius;
  }

  Eigen::Vector3d valve_axis() const { return frame.z_axis(); }
};

struct PlacementScore {
  double along_line_error = 0.0;  // mm
  double off_line_error = 0.0;    // mm
  double axis_tilt = 0.0;         // deg
  double roll_error = 0.0;        // deg
  double along_line_position = 0.0;  // mm, signed, relative to the target midpoint

  friend bool operator==(const PlacementScore&, const PlacementScore&) = default;
};

namespace detail {
// Angle between two lines (undirected), degrees in [0, 90].
inline double line_angle_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  return rad2deg(std::acos(std::min(c, 1.0)));
}
}  // namespace detail

// Scores a clip pose against a target segment. The clip's z axis is its long axis and its
// x axis points along the clip arms.
inline PlacementScore score_placement(const Pose& clip, Segment target, const ValvePhantom& phantom) {
  const Pose local = phantom.frame.inverse() * clip;
  const Eigen::Vector2d q = local.position.head<2>();
  const double s = phantom.nearest_parameter(q);
  const double len = phantom.arc_length();

  PlacementScore out;
  out.along_line_position = (s - segment_midpoint(target)) * len;
  out.along_line_error = std::abs(out.along_line_position);
  out.off_line_error = (q - phantom.point_at(s)).norm();
  out.axis_tilt = detail::line_angle_deg(local.z_axis(), Eigen::Vector3d::UnitZ());

  const Eigen::Vector3d arm = local.x_axis();
  const Eigen::Vector2d arm_in_plane = arm.head<2>();
  if (arm_in_plane.norm() < 1e-12) {
    out.roll_error = 90.0;
  } else {
    const Eigen::Vector2d perp = phantom.perpendicular_at(s);
    out.roll_error =
        detail::line_angle_deg(Eigen::Vector3d(arm_in_plane.x(), arm_in_plane.y(), 0.0), Eigen::Vector3d(perp.x(), perp.y(), 0.0));
  }
  return out;
}

struct CollisionReport {
  double swept_volume_proxy = 0.0;  // mm^3
  bool violation = false;
};

inline CollisionReport check_atrium_collision(std::span<const Pose> clip_path, const ValvePhantom& phantom) {
  if (clip_path.empty()) throw std::invalid_argument("clip path is empty");
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(clip_path.size());
  CollisionReport out;
  for (const Pose& p : clip_path) {
    pts.push_back(p.position);
    if (!phantom.inside_atrium(p.position)) out.violation = true;
  }
  out.swept_volume_proxy = convex_hull_volume(pts);
  return out;
}

}  // namespace teer
