#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "teer/hid.hpp"
#include "teer/plant.hpp"

namespace teer {

// Maximum sheath speeds.
struct SpeedLimits {
  double flexure_max = 5.46;      // deg/s
  double roll_max = 14.56;        // deg/s
  double translation_max = 6.0;   // mm/s

  constexpr double limit(Dof d) const {
    switch (dof_kind(d)) {
      case DofKind::translation: return translation_max;
      case DofKind::rotation: return roll_max;
      case DofKind::flexure: return flexure_max;
    }
    return 0.0;
  }

  bool valid() const { return flexure_max > 0 && roll_max > 0 && translation_max > 0; }
};

enum class Sheath : unsigned { transseptal = 1u, intermediate = 2u, device = 4u };

struct SheathSet {
  unsigned bits = 0;
  constexpr bool contains(Sheath s) const { return (bits & static_cast<unsigned>(s)) != 0; }
  friend constexpr bool operator==(const SheathSet&, const SheathSet&) = default;
};

constexpr SheathSet operator|(Sheath a, Sheath b) {
  return {static_cast<unsigned>(a) | static_cast<unsigned>(b)};
}
constexpr SheathSet operator|(SheathSet a, Sheath b) { return {a.bits | static_cast<unsigned>(b)}; }

struct ControlMode {
  int id = 1;
  DofSet enabled_dofs;          // responding to sticks and D-pad
  SheathSet trigger_translation_set;  // advanced and retracted together by the triggers

  friend constexpr bool operator==(const ControlMode&, const ControlMode&) = default;
};

// Joint driven by a grouped trigger translation. Moving a group of nested sheaths together
// changes only the relative translation of the outermost member.
constexpr std::optional<Dof> trigger_joint(SheathSet set) {
  if (set.contains(Sheath::transseptal)) return Dof::ts_translation;
  if (set.contains(Sheath::intermediate)) return Dof::is_translation;
  if (set.contains(Sheath::device)) return Dof::ds_translation;
  return std::nullopt;
}

constexpr ControlMode control_mode(int id) {
  switch (id) {
    case 1:
      return {1, DofSet{Dof::ts_bend, Dof::ts_rotation},
              Sheath::transseptal | Sheath::intermediate | Sheath::device};
    case 2:
      return {2, DofSet{Dof::ts_rotation, Dof::is_bend_ml}, Sheath::intermediate | Sheath::device};
    case 3:
      return {3, DofSet{Dof::is_translation, Dof::is_bend_ml, Dof::is_bend_ap, Dof::ts_rotation},
              Sheath::intermediate | Sheath::device};
    case 4:
      return {4, DofSet{Dof::ds_translation, Dof::ds_rotation_cmd, Dof::ts_rotation},
              SheathSet{static_cast<unsigned>(Sheath::device)}};
    default:
      throw std::invalid_argument("control mode must be 1..4");
  }
}

// Every joint a mode can move, through any input.
constexpr DofSet movable_dofs(const ControlMode& mode) {
  DofSet s = mode.enabled_dofs;
  if (auto j = trigger_joint(mode.trigger_translation_set)) s.insert(*j);
  return s;
}

// Delivery step (1..8) to the control mode used for it.
constexpr int mode_for_step(int step) {
  if (step < 1 || step > 8) throw std::invalid_argument("delivery step must be 1..8");
  return step <= 3 ? step : 4;
}

struct ModeBindings {
  std::array<int, 4> mode{1, 2, 3, 4};  // indexed by ModeButton X, Y, A, B

  int operator[](ModeButton b) const { return mode[static_cast<std::size_t>(b)]; }
};

inline ControlMode set_mode(const ControlMode& /*current*/, ModeButton button, const ModeBindings& bindings = {}) {
  return control_mode(bindings[button]);
}

struct VelocityCommand {
  DofVector rate;  // deg/s or mm/s
  bool dither_requested = false;

  bool is_zero() const {
    return std::all_of(rate.v.begin(), rate.v.end(), [](double r) { return r == 0.0; });
  }

  friend bool operator==(const VelocityCommand&, const VelocityCommand&) = default;
};

inline VelocityCommand clamp(VelocityCommand cmd, const SpeedLimits& limits) {
  for (Dof d : kAllDofs) {
    const double lim = limits.limit(d);
    cmd.rate[d] = std::clamp(cmd.rate[d], -lim, lim);
  }
  return cmd;
}

// Gamepad to joint velocities: left stick x/y -> TS bend/roll, right stick x/y -> IS M/L
// and A/P bend, D-pad up/down -> DS translation, D-pad right/left -> DS roll, triggers ->
// grouped translation (right advances, left retracts). Inputs outside the mode are dropped.
inline VelocityCommand map_gamepad(const GamepadFrame& in, const ControlMode& mode, const SpeedLimits& limits,
                                   bool invert_ap = false) {
  for (double a : {in.left_stick.x, in.left_stick.y, in.right_stick.x, in.right_stick.y, in.triggers.left,
                   in.triggers.right}) {
    if (!std::isfinite(a)) throw MalformedInputError("gamepad frame has a non-finite axis");
  }
  const auto axis = [](double v, double lo) { return std::clamp(v, lo, 1.0); };

  DofVector raw;
  raw[Dof::ts_bend] = axis(in.left_stick.x, -1.0) * limits.flexure_max;
  raw[Dof::ts_rotation] = axis(in.left_stick.y, -1.0) * limits.roll_max;
  raw[Dof::is_bend_ml] = axis(in.right_stick.x, -1.0) * limits.flexure_max;
  raw[Dof::is_bend_ap] = axis(in.right_stick.y, -1.0) * limits.flexure_max * (invert_ap ? -1.0 : 1.0);
  raw[Dof::ds_translation] = ((in.dpad.up ? 1.0 : 0.0) - (in.dpad.down ? 1.0 : 0.0)) * limits.translation_max;
  raw[Dof::ds_rotation_cmd] = ((in.dpad.right ? 1.0 : 0.0) - (in.dpad.left ? 1.0 : 0.0)) * limits.roll_max;

  VelocityCommand cmd;
  for (Dof d : kAllDofs) {
    if (mode.enabled_dofs.contains(d)) cmd.rate[d] = raw[d];
  }
  if (auto j = trigger_joint(mode.trigger_translation_set)) {
    cmd.rate[*j] += (axis(in.triggers.right, 0.0) - axis(in.triggers.left, 0.0)) * limits.translation_max;
  }
  cmd = clamp(cmd, limits);
  cmd.dither_requested = mode.id == 4 && cmd.rate[Dof::ds_rotation_cmd] != 0.0;
  return cmd;
}

namespace detail {

// Euler step of the joints with limit saturation; returns the realized per-DOF rates.
inline DofVector integrate_joints(JointState& js, const DofVector& rate, double dt, const JointLimits& limits) {
  DofVector realized;
  for (Dof d : kAllDofs) {
    const double before = js[d];
    js[d] = limits.saturate(d, before + rate[d] * dt);
    realized[d] = (js[d] - before) / dt;
  }
  return realized;
}

inline double is_bend_rate(const DofVector& realized) {
  return std::abs(realized[Dof::is_bend_ml]) + std::abs(realized[Dof::is_bend_ap]);
}

}  // namespace detail

// One tick of the robotic path. Translation carts are servo-held, so intermediate flexure
// never drags the device sheath along.
inline PlantState step_robotic(PlantState s, const VelocityCommand& cmd, double dt, const PlantModel& model) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  const DofVector realized = detail::integrate_joints(s.js, cmd.rate, dt, model.limits);
  s.dist = step_dither(cmd.dither_requested, dt, s.dist, model.dither);
  s.dist = step_coupling(detail::is_bend_rate(realized), /*ds_cart_locked=*/true, dt, s.dist, model.friction);
  s.dist = step_torsion(realized[Dof::ds_rotation_cmd], realized[Dof::ds_translation], cmd.dither_requested, dt,
                        s.dist, model.friction, model.dither);
  return s;
}

// A single handle adjustment: at most one DOF moving, optionally with hand dither.
struct ManualAction {
  std::optional<Dof> dof;
  double rate = 0.0;  // deg/s or mm/s
  bool hand_dither = false;

  static ManualAction idle() { return {}; }

  friend bool operator==(const ManualAction&, const ManualAction&) = default;
};

// One tick of the manual path: no mode gating, carts free (coupling active), dither only
// when the operator dithers by hand.
inline PlantState step_manual(PlantState s, const ManualAction& action, double dt, const PlantModel& model,
                              const SpeedLimits& limits = {}) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  if (!std::isfinite(action.rate)) throw MalformedInputError("manual action rate is not finite");
  VelocityCommand cmd;
  if (action.dof) cmd.rate[*action.dof] = action.rate;
  cmd = clamp(cmd, limits);
  const DofVector realized = detail::integrate_joints(s.js, cmd.rate, dt, model.limits);
  s.dist = step_dither(action.hand_dither, dt, s.dist, model.dither);
  s.dist = step_coupling(detail::is_bend_rate(realized), /*ds_cart_locked=*/false, dt, s.dist, model.friction);
  s.dist = step_torsion(realized[Dof::ds_rotation_cmd], realized[Dof::ds_translation], action.hand_dither, dt,
                        s.dist, model.friction, model.dither);
  return s;
}

struct ControlSettings {
  SpeedLimits limits;
  ModeBindings bindings;
  double deadzone = kDefaultDeadzone;
  bool invert_ap = false;
};

// Stateful front end of the robotic path: latches the most recent input frame, turns mode
// button presses into mode changes, and emits one VelocityCommand per tick.
class RoboticController {
 public:
  struct Output {
    VelocityCommand cmd;
    std::optional<int> mode_changed_to;
  };

  explicit RoboticController(ControlSettings settings = {}, int initial_mode = 1)
      : settings_(settings), mode_(control_mode(initial_mode)) {}

  const ControlMode& mode() const { return mode_; }
  const ControlSettings& settings() const { return settings_; }

  // `fresh` is a frame received since the previous tick, if any. Without one, the latched
  // frame keeps driving. A mode change outputs a zero command and drops the latched frame,
  // so motion resumes only on new input.
  Output tick(const std::optional<GamepadFrame>& fresh) {
    Output out;
    if (fresh) {
      const GamepadFrame frame = normalize(*fresh, settings_.deadzone);
      if (auto button = edges_.update(frame.buttons)) {
        out.mode_changed_to = change_mode(*button);
        return out;
      }
      latched_ = frame;
    }
    if (latched_) out.cmd = map_gamepad(*latched_, mode_, settings_.limits, settings_.invert_ap);
    return out;
  }

  // Explicit mode selection outside the frame stream.
  int select(ModeButton button) { return change_mode(button); }

  // Forget the latched frame (driver gone or input stale).
  void clear_input() { latched_.reset(); }

 private:
  int change_mode(ModeButton button) {
    mode_ = set_mode(mode_, button, settings_.bindings);
    latched_.reset();
    return mode_.id;
  }

  ControlSettings settings_;
  ControlMode mode_;
  ModeButtonEdges edges_;
  std::optional<GamepadFrame> latched_;
};

}  // namespace teer
