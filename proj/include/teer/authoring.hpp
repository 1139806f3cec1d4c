#pragma once

// Virtual operator used to author the shipped scenario files. It plans against the
// simulator (closed loop at authoring time) and freezes what it did as an open-loop
// command script, so replaying the script reproduces the same trial exactly.

#include <Eigen/Dense>
#include <random>

#include "teer/trials.hpp"

namespace teer::authoring {

struct OperatorProfile {
  double hover_height = 15.0;    // mm above the annulus plane at the end of step 3
  double descend = 25.0;         // mm, step 5
  double retract = 10.0;         // mm, step 6
  double twist_tolerance = 8.0;  // deg of roll error accepted without correcting
  double grippers_time = 4.0;    // s, step 7
  double close_time = 3.0;       // s, step 8
  // Manual handling.
  double regrip_dwell = 1.0;      // s between handle changes
  double inspect_dwell = 8.0;     // s spent re-assessing at the end of each correction
  double dither_on = 1.0;         // s, hand dither bursts during a roll
  double dither_off = 1.0;        // s
  double undithered_approach = 25.0;  // deg of remaining roll done without dither
  double lateral_offset = 3.0;    // mm, intermediate sheath deflection after the step-4 roll
  // Robotic handling.
  double frame_pause = 0.3;  // s of neutral input between frames
};

// Human variability of one trial, frozen into its script.
struct Variation {
  double aim_along = 0.0;      // mm, along-line aiming bias
  double timing_jitter = 0.0;  // fractional jitter of dwell times
  double axis_noise = 0.0;     // fractional error of robotic stick deflections
  double rate_fraction = 1.0;  // manual knob speed as a fraction of the limit
  double roll_bias = 0.0;      // deg, roll target error
  double stroke_jitter = 0.0;  // mm, translation distance error
  double overshoot = 0.0;      // deg, manual flexure overshoot then return
  double offset_angle = 0.0;   // rad, direction of the lateral offset in the tip frame
  std::uint64_t seed = 0;
};

inline ModeButton button_for_mode(int mode, const ModeBindings& b) {
  for (ModeButton btn : {ModeButton::X, ModeButton::Y, ModeButton::A, ModeButton::B}) {
    if (b[btn] == mode) return btn;
  }
  throw std::invalid_argument("no button bound to mode " + std::to_string(mode));
}

inline double round_duration(long ticks, double dt) { return std::round(static_cast<double>(ticks) * dt * 1e6) / 1e6; }

// ---- goal solving ----

struct HoverGoal {
  Eigen::Vector2d target;  // valve frame, where the clip axis should meet the annulus plane
  double height = 15.0;    // mm, clip tip above the annulus plane
  double height_weight = 0.05;  // soft: the step-5 descent absorbs height error
  double tilt_weight = 20.0;
};

inline constexpr std::array<Dof, 4> kPositioningDofs = {Dof::is_translation, Dof::is_bend_ml, Dof::is_bend_ap,
                                                        Dof::ts_rotation};

inline Eigen::Matrix<double, 5, 1> hover_residual(const PlantState& s, const HoverGoal& g, const SessionConfig& cfg) {
  const Pose local = cfg.phantom.frame.inverse() * clip_pose(s, cfg.plant);
  const Eigen::Vector3d a = local.z_axis();
  const Eigen::Vector3d p = local.position;
  Eigen::Matrix<double, 5, 1> r;
  const double az = std::min(a.z(), -0.05);
  const Eigen::Vector3d q = p + (-p.z() / az) * a;
  r << q.x() - g.target.x(), q.y() - g.target.y(), g.height_weight * (p.z() - g.height), g.tilt_weight * a.x(), g.tilt_weight * a.y();
  return r;
}

// Levenberg-Marquardt over the four positioning joints, disturbance state held fixed.
inline JointState solve_hover(const PlantState& start, const HoverGoal& goal, const SessionConfig& cfg) {
  PlantState s = start;
  const auto& lim = cfg.plant.limits;
  auto residual = [&](const PlantState& st) { return hover_residual(st, goal, cfg); };
  Eigen::Matrix<double, 5, 1> r = residual(s);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  for (int it = 0; it < 200 && cost > 1e-20; ++it) {
    Eigen::Matrix<double, 5, 4> J;
    for (int c = 0; c < 4; ++c) {
      const Dof d = kPositioningDofs[c];
      const double h = 1e-6 * std::max(1.0, std::abs(s.js[d]));
      PlantState sp = s, sm = s;
      sp.js[d] += h;
      sm.js[d] -= h;
      J.col(c) = (residual(sp) - residual(sm)) / (2 * h);
    }
    const Eigen::Matrix4d A = J.transpose() * J;
    const Eigen::Vector4d b = -J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 20; ++tries) {
      const Eigen::Vector4d delta = (A + lambda * Eigen::Matrix4d(A.diagonal().asDiagonal()) +
                                     1e-12 * Eigen::Matrix4d::Identity())
                                        .ldlt()
                                        .solve(b);
      PlantState trial = s;
      for (int c = 0; c < 4; ++c) {
        const Dof d = kPositioningDofs[c];
        trial.js[d] = lim.saturate(d, s.js[d] + delta[c]);
      }
      const auto rt = residual(trial);
      if (rt.squaredNorm() < cost) {
        s = trial;
        r = rt;
        cost = rt.squaredNorm();
        lambda = std::max(lambda / 3, 1e-9);
        improved = true;
        break;
      }
      lambda *= 4;
    }
    if (!improved) break;
  }
  return s.js;
}

// Distal roll at which the clip arms are perpendicular to the coaptation line at the point
// the clip is over, searched upwards from `from` (rolls are always made in the positive
// direction first).
inline double perpendicular_roll(const PlantState& start, Segment target, const SessionConfig& cfg, double from) {
  PlantState s = start;
  auto err = [&](double roll) {
    s.dist.distal_roll = roll;
    s.dist.windup = 0.0;
    return score_placement(clip_pose(s, cfg.plant), target, cfg.phantom).roll_error;
  };
  double best = from, best_e = INFINITY;
  for (int k = 0; k <= 1800; ++k) {
    const double r = from + 0.1 * k;
    const double e = err(r);
    if (e < best_e - 1e-12) best_e = e, best = r;
  }
  double lo = best - 0.1, hi = best + 0.1;
  for (int it = 0; it < 80; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (err(m1) < err(m2)) hi = m2; else lo = m1;
  }
  return 0.5 * (lo + hi);
}

// ---- script writer ----

class ScriptWriter {
 public:
  ScriptWriter(CommandScript header, const SessionConfig& cfg, OperatorProfile profile, Variation var)
      : script_(std::move(header)), cfg_(cfg), runner_(script_, cfg), prof_(profile), var_(var), rng_(var.seed) {}

  const PlantState& state() const { return runner_.state(); }
  const SessionConfig& config() const { return cfg_; }
  const OperatorProfile& profile() const { return prof_; }
  const Variation& variation() const { return var_; }
  bool robotic() const { return script_.control == ControlPath::robotic; }
  double dt() const { return cfg_.dt(); }
  double now() const { return runner_.now(); }

  void emit(ScriptItem item) {
    runner_.apply(item);
    script_.items.push_back(std::move(item));
  }

  CommandScript script() const { return script_; }
  TrialLog finish() { return runner_.finish(); }

  // Uniform draw in [-1, 1] from this trial's generator.
  // Spelled out rather than std::uniform_real_distribution so the draw is the same on every
  // standard library.
  double jitter() { return 2.0 * static_cast<double>(rng_() >> 11) * 0x1.0p-53 - 1.0; }

  void wait(double seconds) {
    const long n = std::lround(seconds / dt());
    if (n > 0) emit(WaitItem{round_duration(n, dt())});
  }

  void dwell(double seconds) { wait(seconds * (1.0 + var_.timing_jitter * jitter())); }

  void step_start(int step) { emit(MarkerItem{MarkerKind::step_start, step}); }
  void step_end(int step) { emit(MarkerItem{MarkerKind::step_end, step}); }
  void correction_start() { emit(MarkerItem{MarkerKind::correction_start, 0}); }
  void correction_end() { emit(MarkerItem{MarkerKind::correction_end, 0}); }

  void mode(int id) {
    if (!robotic() || runner_.controller().mode().id == id) return;
    emit(ModeItem{button_for_mode(id, cfg_.control.bindings)});
  }

  // Manual: turn one knob to an exact target value, then let go and re-grip.
  void manual_move(Dof d, double target, bool hand_dither = false) {
    const double delta = target - state().js[d];
    const double speed = cfg_.control.limits.limit(d) * var_.rate_fraction;
    const long n = static_cast<long>(std::ceil(std::abs(delta) / (speed * dt()) - 1e-9));
    if (n <= 0 || std::abs(delta) < 1e-9) return;
    emit(ActionItem{ManualAction{d, delta / (static_cast<double>(n) * dt()), hand_dither}, round_duration(n, dt())});
    dwell(prof_.regrip_dwell);
  }

  // Robotic: one held frame moving up to one DOF per input axis, all finishing together.
  // Deflections below the deadzone are done as separate frames.
  void robotic_move(std::vector<std::pair<Dof, double>> targets) {
    const auto& lim = cfg_.control.limits;
    const double floor_axis = 1.2 * cfg_.control.deadzone;
    std::vector<std::pair<Dof, double>> now, later;
    long n = 0;
    for (auto [d, target] : targets) {
      const double delta = target - state().js[d];
      if (std::abs(delta) < 1e-9) continue;
      now.emplace_back(d, delta);
      n = std::max(n, static_cast<long>(std::ceil(std::abs(delta) / (lim.limit(d) * dt()) - 1e-9)));
    }
    if (now.empty()) return;
    GamepadFrame f;
    bool any = false;
    for (auto [d, delta] : now) {
      double axis = delta / (static_cast<double>(n) * dt() * lim.limit(d));
      if (std::abs(axis) < floor_axis) {
        later.emplace_back(d, state().js[d] + delta);
        continue;
      }
      axis *= 1.0 + var_.axis_noise * jitter();
      axis = std::clamp(axis, -1.0, 1.0);
      set_axis(f, d, axis);
      any = true;
    }
    if (any) {
      emit(FrameItem{f, round_duration(n, dt())});
      wait(prof_.frame_pause);
    }
    for (auto [d, target] : later) robotic_single(d, target, floor_axis);
  }

  // Roll the device sheath until the distal (clip) roll reaches `target`.
  void roll_to(double target) {
    if (robotic()) {
      robotic_roll_to(target);
    } else {
      manual_roll_to(target);
    }
  }

  // Device sheath translation by `delta` mm at full speed.
  void translate_ds(double delta) {
    if (robotic()) {
      const long n = std::lround(std::abs(delta) / (cfg_.control.limits.translation_max * dt()));
      if (n == 0) return;
      GamepadFrame f;
      (delta > 0 ? f.dpad.up : f.dpad.down) = true;
      emit(FrameItem{f, round_duration(n, dt())});
      wait(prof_.frame_pause);
    } else {
      manual_move(Dof::ds_translation, state().js[Dof::ds_translation] + delta);
    }
  }

  void clip(std::optional<ClipArms> arms, std::optional<Grippers> grippers = std::nullopt) {
    emit(ClipItem{arms, grippers, std::nullopt});
  }

  // Move the positioning joints to `goal`: one knob at a time (manual) or all four inputs
  // held together (robotic).
  void position(const JointState& goal, double min_change = 0.02) {
    if (robotic()) {
      std::vector<std::pair<Dof, double>> targets;
      for (Dof d : kPositioningDofs) targets.emplace_back(d, goal[d]);
      robotic_move(std::move(targets));
    } else {
      for (Dof d : {Dof::ts_rotation, Dof::is_bend_ml, Dof::is_bend_ap, Dof::is_translation}) {
        if (std::abs(goal[d] - state().js[d]) > min_change) manual_move(d, goal[d]);
      }
    }
  }

  // Closed-loop hover positioning: solve, move, re-solve and touch up. The operator aims the
  // clip axis as if the device sheath sat at its commanded length; on the manual path the
  // uncontrolled extension is then pulled back by hand.
  void hover(const HoverGoal& goal, int passes = 3, double tolerance = 0.05) {
    for (int p = 0; p < passes; ++p) {
      PlantState aim = state();
      aim.dist.coupled_extension = 0.0;
      const JointState js = solve_hover(aim, goal, cfg_);
      double change = 0.0;
      for (Dof d : kPositioningDofs) change = std::max(change, std::abs(js[d] - state().js[d]));
      if (change < tolerance) break;
      position(js);
    }
    if (!robotic()) {
      const double excess = state().dist.coupled_extension - compensated_;
      if (excess > 0.05) {
        manual_move(Dof::ds_translation, state().js[Dof::ds_translation] - excess);
        compensated_ += excess;
      }
    }
  }

 private:
  void set_axis(GamepadFrame& f, Dof d, double axis) {
    const ControlMode& m = runner_.controller().mode();
    switch (d) {
      case Dof::ts_bend: f.left_stick.x = axis; return;
      case Dof::ts_rotation: f.left_stick.y = axis; return;
      case Dof::is_bend_ml: f.right_stick.x = axis; return;
      case Dof::is_bend_ap: f.right_stick.y = cfg_.control.invert_ap ? -axis : axis; return;
      default: break;
    }
    if (trigger_joint(m.trigger_translation_set) != d)
      throw ScriptError(std::string("no analog input drives ") + std::string(dof_name(d)) + " in mode " +
                        std::to_string(m.id));
    (axis > 0 ? f.triggers.right : f.triggers.left) = std::abs(axis);
  }

  void robotic_single(Dof d, double target, double floor_axis) {
    const auto& lim = cfg_.control.limits;
    const double delta = target - state().js[d];
    const long n = static_cast<long>(std::floor(std::abs(delta) / (floor_axis * lim.limit(d) * dt())));
    if (n <= 0) return;
    GamepadFrame f;
    set_axis(f, d, delta / (static_cast<double>(n) * dt() * lim.limit(d)));
    emit(FrameItem{f, round_duration(n, dt())});
    wait(prof_.frame_pause);
  }

  template <class StepFn>
  long ticks_until_roll(PlantState s, double target, StepFn step, long cap) const {
    const bool up = target >= s.dist.distal_roll;
    for (long k = 1; k <= cap; ++k) {
      s = step(s);
      if (up ? s.dist.distal_roll >= target : s.dist.distal_roll <= target) return k;
    }
    return -1;
  }

  void robotic_roll_to(double target) {
    const bool up = target >= state().dist.distal_roll;
    GamepadFrame f;
    (up ? f.dpad.right : f.dpad.left) = true;
    const VelocityCommand cmd = map_gamepad(f, runner_.controller().mode(), cfg_.control.limits, cfg_.control.invert_ap);
    const long n = ticks_until_roll(state(), target, [&](const PlantState& s) { return step_robotic(s, cmd, dt(), cfg_.plant); },
                                    100000);
    if (n < 0) throw ScriptError("roll target unreachable");
    emit(FrameItem{f, round_duration(n, dt())});
    wait(prof_.frame_pause);
  }

  // Hand dither in bursts while far from the target, then a plain final approach.
  void manual_roll_to(double target) {
    const double rate = (target >= state().dist.distal_roll ? 1.0 : -1.0) * cfg_.control.limits.roll_max * var_.rate_fraction;
    bool dithering = true;
    for (int guard = 0; guard < 1000; ++guard) {
      const double remaining = std::abs(target - state().dist.distal_roll);
      const bool final_leg = remaining <= prof_.undithered_approach;
      const bool dith = !final_leg && dithering;
      const ManualAction act{Dof::ds_rotation_cmd, rate, dith};
      auto step = [&](const PlantState& s) { return step_manual(s, act, dt(), cfg_.plant, cfg_.control.limits); };
      long chunk;
      if (final_leg) {
        chunk = ticks_until_roll(state(), target, step, 100000);
        if (chunk < 0) throw ScriptError("roll target unreachable");
      } else {
        const double len = (dith ? prof_.dither_on : prof_.dither_off) * (1.0 + var_.timing_jitter * jitter());
        chunk = std::max(1L, std::lround(len / dt()));
        // Stop the burst early if the final leg starts inside it.
        PlantState s = state();
        for (long k = 1; k <= chunk; ++k) {
          s = step(s);
          if (std::abs(target - s.dist.distal_roll) <= prof_.undithered_approach) {
            chunk = k;
            break;
          }
        }
      }
      emit(ActionItem{act, round_duration(chunk, dt())});
      if (final_leg) break;
      dithering = !dithering;
    }
    dwell(prof_.regrip_dwell);
  }

  CommandScript script_;
  SessionConfig cfg_;
  TrialRunner runner_;
  OperatorProfile prof_;
  Variation var_;
  std::mt19937_64 rng_;
  double compensated_ = 0.0;  // mm of coupled extension already pulled back
};

}  // namespace teer::authoring
