#pragma once

#include "teer/disturbance.hpp"
#include "teer/joints.hpp"
#include "teer/kinematics.hpp"

namespace teer {

// Everything needed to step and display the simulated catheter.
struct PlantModel {
  CatheterGeometry geometry;
  JointLimits limits;
  FrictionParams friction;
  DitherSpec dither;
};

struct PlantState {
  JointState js;
  DisturbanceState dist;

  friend bool operator==(const PlantState&, const PlantState&) = default;
};

inline ChainPoses plant_fk(const PlantState& s, const PlantModel& model) {
  return chain_fk(s.js, model.geometry, s.dist.offsets());
}

inline Pose clip_pose(const PlantState& s, const PlantModel& model) { return plant_fk(s, model).clip; }

// Device-sheath translation as physically realized: joint value plus coupled extension
// plus the axial dither displacement.
inline double effective_ds_translation(const PlantState& s) {
  return s.js[Dof::ds_translation] + s.dist.coupled_extension + s.dist.dither_offset;
}

}  // namespace teer
