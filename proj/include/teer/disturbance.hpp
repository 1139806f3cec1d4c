#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include "teer/kinematics.hpp"

namespace teer {

// Friction and coupling constants of the plant. The defaults are the calibrated values;
// `teer calibrate` regenerates k_couple and release_gain against the canonical scripts.
struct FrictionParams {
  double k_couple = 6.0 / 70.0;   // mm of device-sheath extension per degree of IS flexure
  double extension_cap = 10.0;    // mm
  double tau_static = 30.0;       // deg of windup held by static friction
  double dither_relief = 0.2;     // multiplier on tau_static while dithering at reference amplitude
  double release_gain = 0.06468;  // fraction of windup released per mm of translation
  double windup_cap = 45.0;       // deg

  bool valid() const {
    return k_couple > 0 && extension_cap > 0 && tau_static > 0 && dither_relief > 0 &&
           dither_relief < 1 && release_gain > 0 && windup_cap > 0;
  }
};

struct DitherSpec {
  double amplitude = 2.5;            // mm
  double frequency = 2.2;            // Hz
  double reference_amplitude = 2.5;  // amplitude at which relief equals FrictionParams::dither_relief
};

// Hidden plant state. windup = ds_rotation_cmd - distal_roll is maintained by construction.
struct DisturbanceState {
  double windup = 0.0;             // deg
  double distal_roll = 0.0;        // deg
  double coupled_extension = 0.0;  // mm
  bool dither_active = false;
  double dither_phase = 0.0;   // rad
  double dither_offset = 0.0;  // mm, current axial dither displacement
  std::array<double, 2> lateral_deflection{0.0, 0.0};  // mm, in the intermediate tip frame

  DistalOffsets offsets() const {
    DistalOffsets o;
    o.distal_roll = distal_roll;
    o.ds_extra_translation = coupled_extension + dither_offset;
    o.is_tip_deflection = Eigen::Vector2d(lateral_deflection[0], lateral_deflection[1]);
    return o;
  }

  friend bool operator==(const DisturbanceState&, const DisturbanceState&) = default;
};

// Device-sheath extension induced by flexing the intermediate sheath while the device
// cart is free to slide.
inline DisturbanceState step_coupling(double is_bend_rate, bool ds_cart_locked, double dt,
                                      DisturbanceState state, const FrictionParams& params) {
  if (ds_cart_locked) return state;
  state.coupled_extension =
      std::min(state.coupled_extension + params.k_couple * std::abs(is_bend_rate) * dt, params.extension_cap);
  return state;
}

// Static-friction threshold scale while dithering. Larger dither amplitudes relieve more;
// zero amplitude relieves nothing.
inline double dither_relief_factor(const FrictionParams& params, const DitherSpec& spec) {
  if (spec.reference_amplitude <= 0.0) return 1.0;
  return std::pow(params.dither_relief, spec.amplitude / spec.reference_amplitude);
}

// Stick-slip torsion between device and intermediate sheaths. Commanded roll charges the
// windup; the distal end slips once |windup| exceeds the effective static threshold, and
// translation bleeds windup into distal roll.
inline DisturbanceState step_torsion(double ds_roll_rate, double ds_trans_rate, bool dithering, double dt,
                                     DisturbanceState state, const FrictionParams& params,
                                     const DitherSpec& dither = {}) {
  state.windup += ds_roll_rate * dt;

  double threshold = params.tau_static * (dithering ? dither_relief_factor(params, dither) : 1.0);
  threshold = std::min(threshold, params.windup_cap);
  if (std::abs(state.windup) > threshold) {
    const double held = std::copysign(threshold, state.windup);
    state.distal_roll += state.windup - held;
    state.windup = held;
  }

  if (ds_trans_rate != 0.0 && state.windup != 0.0) {
    double release = params.release_gain * std::abs(ds_trans_rate) * state.windup * dt;
    if (std::abs(release) > std::abs(state.windup)) release = state.windup;
    state.distal_roll += release;
    state.windup -= release;
  }
  return state;
}

inline double dither_offset(double t, const DitherSpec& spec) {
  return spec.amplitude * std::sin(2.0 * std::numbers::pi * spec.frequency * t);
}

// Advances the axial dither oscillator. When the request drops, the oscillation runs on to
// its next zero crossing so the sheath is not stepped back discontinuously.
inline DisturbanceState step_dither(bool requested, double dt, DisturbanceState state, const DitherSpec& spec) {
  if (!requested && !state.dither_active) return state;
  const double before = state.dither_phase;
  const double after = before + 2.0 * std::numbers::pi * spec.frequency * dt;
  if (!requested && std::floor(after / std::numbers::pi) != std::floor(before / std::numbers::pi)) {
    state.dither_active = false;
    state.dither_phase = 0.0;
    state.dither_offset = 0.0;
    return state;
  }
  state.dither_active = true;
  state.dither_phase = after;
  state.dither_offset = spec.amplitude * std::sin(after);
  return state;
}

}  // namespace teer
