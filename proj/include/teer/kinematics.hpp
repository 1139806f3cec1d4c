#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "teer/joints.hpp"

namespace teer {

inline constexpr double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

// Rigid pose: position in mm, orientation as a unit quaternion.
struct Pose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();

  static Pose identity() { return {}; }

  Pose operator*(const Pose& rhs) const {
    Pose out;
    out.position = position + orientation * rhs.position;
    out.orientation = (orientation * rhs.orientation).normalized();
    return out;
  }

  Pose inverse() const {
    Pose out;
    out.orientation = orientation.conjugate();
    out.position = -(out.orientation * position);
    return out;
  }

  Eigen::Vector3d transform(const Eigen::Vector3d& p) const { return position + orientation * p; }

  // Local axes expressed in the parent frame.
  Eigen::Vector3d x_axis() const { return orientation * Eigen::Vector3d::UnitX(); }
  Eigen::Vector3d y_axis() const { return orientation * Eigen::Vector3d::UnitY(); }
  Eigen::Vector3d z_axis() const { return orientation * Eigen::Vector3d::UnitZ(); }
};

inline Pose rot_z(double deg) {
  Pose p;
  p.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(deg2rad(deg), Eigen::Vector3d::UnitZ()));
  return p;
}

inline Pose translation(const Eigen::Vector3d& t) {
  Pose p;
  p.position = t;
  return p;
}

struct SheathGeometry {
  double bend_section_length = 80.0;  // mm; for the rigid device sheath, its rigid length
  double outer_radius = 2.9;          // mm
};

// Geometry of the full three-sheath chain. base_frame is where the transseptal sheath
// emerges, with +z along the insertion direction and +x the positive bend direction.
struct CatheterGeometry {
  SheathGeometry transseptal{80.0, 2.9};
  SheathGeometry intermediate{60.0, 2.2};
  SheathGeometry device{120.0, 1.6};
  Pose base_frame;

  bool valid() const {
    return transseptal.bend_section_length > 0 && intermediate.bend_section_length > 0 &&
           device.bend_section_length > 0 && transseptal.outer_radius > intermediate.outer_radius &&
           intermediate.outer_radius > device.outer_radius && device.outer_radius > 0;
  }
};

// Curvature magnitude below which the arc is evaluated with a truncated series.
inline constexpr double kSeriesThresholdRad = 1e-4;

// Tip pose of a single sheath: a straight passive segment followed by the exposed part of
// the bend section, bent in the local x-z plane and rolled about the proximal z axis.
// The bend section has constant curvature bend/bend_section_length; when the sheath is
// only partly inserted the exposed fraction subtends a proportional angle.
inline Pose sheath_fk(double bend_deg, double roll_deg, double insertion, const SheathGeometry& geom) {
  const double len = geom.bend_section_length;
  const double exposed = std::clamp(insertion, 0.0, len);
  const double straight = std::max(insertion - len, 0.0);
  const double theta = deg2rad(bend_deg) * exposed / len;

  double x = 0.0;
  double z = 0.0;
  if (std::abs(theta) < kSeriesThresholdRad) {
    const double t2 = theta * theta;
    x = exposed * theta * 0.5 * (1.0 - t2 / 12.0);
    z = exposed * (1.0 - t2 / 6.0);
  } else {
    const double radius = exposed / theta;
    const double half = std::sin(theta * 0.5);
    x = radius * 2.0 * half * half;
    z = radius * std::sin(theta);
  }

  const Eigen::Quaterniond roll(Eigen::AngleAxisd(deg2rad(roll_deg), Eigen::Vector3d::UnitZ()));
  const Eigen::Quaterniond bend(Eigen::AngleAxisd(theta, Eigen::Vector3d::UnitY()));
  Pose out;
  out.position = roll * Eigen::Vector3d(x, 0.0, straight + z);
  out.orientation = (roll * bend).normalized();
  return out;
}

// Plant quantities that are not joints but move the distal chain: the device sheath's
// actual roll, extra device-sheath extension (coupling plus dither), and a lateral
// deflection of the intermediate tip expressed in its own x-y plane.
struct DistalOffsets {
  double distal_roll = 0.0;        // deg
  double ds_extra_translation = 0.0;  // mm
  Eigen::Vector2d is_tip_deflection = Eigen::Vector2d::Zero();  // mm
};

struct ChainPoses {
  Pose ts_tip;
  Pose is_tip;
  Pose clip;
};

// Intermediate sheath tip relative to the transseptal tip. The two orthogonal bend planes
// combine into a single bend of magnitude hypot(ml, ap) in direction atan2(ap, ml) with
// no net twist of the tip frame.
inline Pose intermediate_fk(double bend_ml, double bend_ap, double insertion, const SheathGeometry& geom) {
  const double bend = std::hypot(bend_ml, bend_ap);
  const double direction = (bend == 0.0) ? 0.0 : rad2deg(std::atan2(bend_ap, bend_ml));
  return sheath_fk(bend, direction, insertion, geom) * rot_z(-direction);
}

inline ChainPoses chain_fk(const JointState& js, const CatheterGeometry& geom, const DistalOffsets& distal = {}) {
  ChainPoses out;
  out.ts_tip = geom.base_frame *
               sheath_fk(js[Dof::ts_bend], js[Dof::ts_rotation], js[Dof::ts_translation], geom.transseptal);
  Pose is_rel = intermediate_fk(js[Dof::is_bend_ml], js[Dof::is_bend_ap], js[Dof::is_translation], geom.intermediate);
  is_rel.position += is_rel.orientation *
                     Eigen::Vector3d(distal.is_tip_deflection.x(), distal.is_tip_deflection.y(), 0.0);
  out.is_tip = out.ts_tip * is_rel;
  const double ds_insertion = std::max(js[Dof::ds_translation] + distal.ds_extra_translation, 0.0);
  out.clip = out.is_tip * sheath_fk(0.0, distal.distal_roll, ds_insertion, geom.device);
  return out;
}

}  // namespace teer
