#pragma once

#include <chrono>
#include <functional>
#include <thread>

#include "teer/trial_log.hpp"

namespace teer {

// Builds a TrialLog tick by tick. Shared by scripted runs and live sessions.
class TrialRecorder {
 public:
  TrialRecorder(const SessionConfig& cfg, ControlPath control, Segment target, std::uint64_t seed, std::string script,
                const PlantState& initial, std::optional<int> mode)
      : cfg_(cfg) {
    log_.header.config_hash = config_hash(cfg);
    log_.header.control = control;
    log_.header.target = target;
    log_.header.seed = seed;
    log_.header.script = std::move(script);
    log_.header.dt = cfg.dt();
    log_.header.config = config_to_json(cfg);
    push_tick(VelocityCommand{}, initial, mode);
  }

  const SessionConfig& config() const { return cfg_; }
  const TrialLog& log() const { return log_; }
  long tick_index() const { return static_cast<long>(log_.ticks.size()) - 1; }
  double now() const { return log_.ticks.back().t; }
  int current_step() const { return step_; }
  bool in_correction() const { return correction_; }
  bool steps_started() const { return steps_started_; }

  // Scripts must drive each step in its mode; a live operator is only recorded.
  void set_enforce_modes(bool on) { enforce_modes_ = on; }

  void tick(const VelocityCommand& cmd, const PlantState& s, std::optional<int> mode) {
    push_tick(cmd, s, mode);
    if (enforce_modes_ && step_ != 0 && !correction_ && mode && !cmd.is_zero() && *mode != mode_for_step(step_)) {
      throw ScriptError("step " + std::to_string(step_) + " must run in mode " + std::to_string(mode_for_step(step_)) +
                        ", commanded in mode " + std::to_string(*mode) + " at t=" + std::to_string(now()));
    }
    // Only the approach (before the clip is sent through the valve) must stay in the atrium.
    if (!through_valve_) {
      const bool inside = cfg_.phantom.inside_atrium(log_.ticks.back().clip.position);
      if (!inside && !outside_) event("violation", {{"what", "atrium"}});
      outside_ = !inside;
    }
  }

  void event(std::string type, json data = json::object()) {
    EventRecord e;
    e.i = tick_index();
    e.t = now();
    e.type = std::move(type);
    e.data = std::move(data);
    log_.events.push_back(std::move(e));
  }

  // Step and correction markers, validated as they arrive.
  void marker(MarkerKind kind, int step = 0) {
    switch (kind) {
      case MarkerKind::step_start:
        if (step_ != 0 || correction_) throw ScriptError("step_start " + std::to_string(step) + " while an interval is open");
        step_ = step;
        steps_started_ = true;
        if (step >= 5) through_valve_ = true;
        event("step_start", {{"step", step}});
        break;
      case MarkerKind::step_end:
        if (step_ != step) throw ScriptError("step_end " + std::to_string(step) + " does not match the open step");
        step_ = 0;
        event("step_end", {{"step", step}});
        break;
      case MarkerKind::correction_start:
        if (step_ != 0 || correction_) throw ScriptError("correction_start while an interval is open");
        if (!steps_started_) throw ScriptError("correction before the first step");
        correction_ = true;
        event("correction_start");
        break;
      case MarkerKind::correction_end:
        if (!correction_) throw ScriptError("correction_end without correction_start");
        correction_ = false;
        event("correction_end");
        break;
    }
  }

  TrialLog finish() {
    if (step_ != 0 || correction_) throw ScriptError("trial ended with an open step or correction");
    log_.summary = compute_summary(log_);
    return std::move(log_);
  }

 private:
  void push_tick(const VelocityCommand& cmd, const PlantState& s, std::optional<int> mode) {
    TickRecord t;
    t.i = static_cast<long>(log_.ticks.size());
    t.t = static_cast<double>(t.i) * cfg_.dt();
    t.step = step_;
    t.correction = correction_;
    t.mode = mode;
    t.cmd = cmd;
    t.state = s;
    t.clip = clip_pose(s, cfg_.plant);
    t.ds_effective = effective_ds_translation(s);
    log_.ticks.push_back(std::move(t));
  }

  SessionConfig cfg_;
  TrialLog log_;
  int step_ = 0;
  bool correction_ = false;
  bool steps_started_ = false;
  bool through_valve_ = false;
  bool outside_ = false;
  bool enforce_modes_ = true;
};

namespace detail {

// DOFs a frame asks to move through sticks and D-pad (triggers always drive the mode's
// translation group).
inline DofSet requested_dofs(const GamepadFrame& f) {
  DofSet s;
  if (f.left_stick.x != 0.0) s.insert(Dof::ts_bend);
  if (f.left_stick.y != 0.0) s.insert(Dof::ts_rotation);
  if (f.right_stick.x != 0.0) s.insert(Dof::is_bend_ml);
  if (f.right_stick.y != 0.0) s.insert(Dof::is_bend_ap);
  if (f.dpad.up != f.dpad.down) s.insert(Dof::ds_translation);
  if (f.dpad.left != f.dpad.right) s.insert(Dof::ds_rotation_cmd);
  return s;
}

inline void apply_clip_item(const ClipItem& c, PlantState& s, TrialRecorder& rec) {
  if (c.attachment == ClipAttachment::released)
    throw ScriptError("scripted trials never release the clip (it cannot be reloaded)");
  if (c.arms == ClipArms::open && rec.current_step() == 4) throw ScriptError("clip arms stay closed during step 4");
  json data = json::object();
  if (c.arms) {
    s.js.clip_arms = *c.arms;
    data["arms"] = to_string(*c.arms);
  }
  if (c.grippers) {
    s.js.grippers = *c.grippers;
    data["grippers"] = to_string(*c.grippers);
  }
  if (c.attachment) {
    s.js.clip = *c.attachment;
    data["attachment"] = to_string(*c.attachment);
  }
  rec.event("clip", data);
}

inline void apply_disturb_item(const DisturbItem& d, PlantState& s, TrialRecorder& rec) {
  s.dist.lateral_deflection[0] += d.lateral_offset[0];
  s.dist.lateral_deflection[1] += d.lateral_offset[1];
  rec.event("lateral_offset", {{"offset", d.lateral_offset}});
}

inline VelocityCommand manual_command(const ManualAction& a, const SpeedLimits& limits) {
  VelocityCommand cmd;
  if (a.dof) cmd.rate[*a.dof] = a.rate;
  cmd = clamp(cmd, limits);
  cmd.dither_requested = a.hand_dither;
  return cmd;
}

inline std::string item_context(const CommandScript& script, std::size_t k) {
  return "script '" + script.name + "' item " + std::to_string(k) + ": ";
}

}  // namespace detail

inline PlantState initial_plant_state(const CommandScript& script, const SessionConfig& cfg) {
  PlantState s;
  s.js = script.initial_state.value_or(cfg.initial_state);
  if (!cfg.plant.limits.within(s.js)) throw ScriptError("script initial_state violates joint limits");
  s.dist.distal_roll = s.js[Dof::ds_rotation_cmd];
  return s;
}

// Executes script items one at a time. Robotic scripts drive the mode-gated controller
// with gamepad frames; manual scripts move one handle at a time with the carts unlocked.
class TrialRunner {
 public:
  TrialRunner(const CommandScript& header, const SessionConfig& cfg)
      : cfg_(cfg),
        name_(header.name),
        robotic_(header.control == ControlPath::robotic),
        state_(initial_plant_state(header, cfg)),
        ctl_(cfg.control, header.initial_mode),
        rec_(cfg, header.control, header.target, header.seed, header.name, state_, mode_now()) {}

  const PlantState& state() const { return state_; }
  const SessionConfig& config() const { return cfg_; }
  const RoboticController& controller() const { return ctl_; }
  const TrialRecorder& recorder() const { return rec_; }
  double now() const { return rec_.now(); }

  void apply(const ScriptItem& item) {
    const double dt = cfg_.dt();
    if (const auto* f = std::get_if<FrameItem>(&item)) {
      if (!robotic_) throw ScriptError("gamepad frame in a manual script");
      const long n = duration_ticks(f->duration, dt);
      for (long i = 0; i < n; ++i) {
        if (i == 0) {
          GamepadFrame frame = f->frame;
          frame.timestamp = rec_.now();
          robotic_tick(frame);
          const DofSet want = detail::requested_dofs(normalize(frame, cfg_.control.deadzone));
          for (Dof d : kAllDofs) {
            if (want.contains(d) && !ctl_.mode().enabled_dofs.contains(d))
              throw ScriptError(std::string(dof_name(d)) + " is gated in mode " + std::to_string(ctl_.mode().id));
          }
        } else {
          robotic_tick(std::nullopt);
        }
      }
    } else if (const auto* a = std::get_if<ActionItem>(&item)) {
      if (robotic_) throw ScriptError("manual action in a robotic script");
      const VelocityCommand cmd = detail::manual_command(a->action, cfg_.control.limits);
      const long n = duration_ticks(a->duration, dt);
      for (long i = 0; i < n; ++i) {
        state_ = step_manual(state_, a->action, dt, cfg_.plant, cfg_.control.limits);
        rec_.tick(cmd, state_, std::nullopt);
      }
    } else if (const auto* w = std::get_if<WaitItem>(&item)) {
      const long n = duration_ticks(w->duration, dt);
      for (long i = 0; i < n; ++i) {
        if (robotic_) {
          GamepadFrame neutral;
          neutral.timestamp = rec_.now();
          robotic_tick(i == 0 ? std::optional(neutral) : std::nullopt);
        } else {
          state_ = step_manual(state_, ManualAction::idle(), dt, cfg_.plant, cfg_.control.limits);
          rec_.tick(VelocityCommand{}, state_, std::nullopt);
        }
      }
    } else if (const auto* m = std::get_if<ModeItem>(&item)) {
      if (!robotic_) throw ScriptError("mode selection in a manual script");
      GamepadFrame press;
      press.timestamp = rec_.now();
      switch (m->button) {
        case ModeButton::X: press.buttons.x = true; break;
        case ModeButton::Y: press.buttons.y = true; break;
        case ModeButton::A: press.buttons.a = true; break;
        case ModeButton::B: press.buttons.b = true; break;
      }
      robotic_tick(press);
    } else if (const auto* mk = std::get_if<MarkerItem>(&item)) {
      rec_.marker(mk->kind, mk->step);
    } else if (const auto* c = std::get_if<ClipItem>(&item)) {
      detail::apply_clip_item(*c, state_, rec_);
    } else if (const auto* d = std::get_if<DisturbItem>(&item)) {
      detail::apply_disturb_item(*d, state_, rec_);
    }
  }

  TrialLog finish() { return rec_.finish(); }

 private:
  std::optional<int> mode_now() const {
    if (robotic_) return ctl_.mode().id;
    return std::nullopt;
  }

  void robotic_tick(const std::optional<GamepadFrame>& fresh) {
    const auto out = ctl_.tick(fresh);
    state_ = step_robotic(state_, out.cmd, cfg_.dt(), cfg_.plant);
    rec_.tick(out.cmd, state_, ctl_.mode().id);
    if (out.mode_changed_to) rec_.event("mode_change", {{"mode", *out.mode_changed_to}});
  }

  SessionConfig cfg_;
  std::string name_;
  bool robotic_;
  PlantState state_;
  RoboticController ctl_;
  TrialRecorder rec_;
};

inline TrialLog run_trial(const CommandScript& script, const SessionConfig& cfg) {
  TrialRunner runner(script, cfg);
  for (std::size_t k = 0; k < script.items.size(); ++k) {
    try {
      runner.apply(script.items[k]);
    } catch (const ScriptError& e) {
      throw ScriptError(detail::item_context(script, k) + e.what());
    }
  }
  try {
    return runner.finish();
  } catch (const ScriptError& e) {
    throw ScriptError("script '" + script.name + "': " + e.what());
  }
}

// Re-simulates a log from its first tick using the logged commands and events, and
// returns the index of the first tick whose state differs, if any.
inline std::optional<long> first_divergence(const TrialLog& log) {
  if (log.ticks.empty()) throw MalformedLogError("log has no ticks");
  const SessionConfig cfg = config_from_json(log.header.config);
  const double dt = log.header.dt;
  PlantState s = log.ticks.front().state;
  std::size_t ev = 0;
  const auto apply_events = [&](long after) {
    while (ev < log.events.size() && log.events[ev].i == after) {
      const EventRecord& e = log.events[ev++];
      if (e.type == "lateral_offset") {
        const auto off = e.data.at("offset").get<std::array<double, 2>>();
        s.dist.lateral_deflection[0] += off[0];
        s.dist.lateral_deflection[1] += off[1];
      } else if (e.type == "clip") {
        if (e.data.contains("arms")) s.js.clip_arms = e.data["arms"] == "open" ? ClipArms::open : ClipArms::closed;
        if (e.data.contains("grippers")) s.js.grippers = e.data["grippers"] == "down" ? Grippers::down : Grippers::up;
        if (e.data.contains("attachment"))
          s.js.clip = e.data["attachment"] == "released" ? ClipAttachment::released : ClipAttachment::attached;
      }
    }
  };
  apply_events(0);
  for (std::size_t k = 1; k < log.ticks.size(); ++k) {
    const VelocityCommand& cmd = log.ticks[k].cmd;
    if (log.header.control == ControlPath::robotic) {
      s = step_robotic(s, cmd, dt, cfg.plant);
    } else {
      ManualAction a;
      a.hand_dither = cmd.dither_requested;
      for (Dof d : kAllDofs) {
        if (cmd.rate[d] != 0.0) {
          if (a.dof) return static_cast<long>(k);  // a manual tick never moves two handles
          a.dof = d;
          a.rate = cmd.rate[d];
        }
      }
      s = step_manual(s, a, dt, cfg.plant, cfg.control.limits);
    }
    if (!(s == log.ticks[k].state)) return static_cast<long>(k);
    apply_events(static_cast<long>(k));
  }
  return std::nullopt;
}

// Summary recomputed from the log matches the logged one byte for byte.
inline bool summary_reproduces(const TrialLog& log) {
  if (!log.summary) return false;
  return json(compute_summary(log)).dump() == json(*log.summary).dump();
}

// ---- replay ----

struct ReplayFrame {
  const TickRecord* tick;
  std::vector<const EventRecord*> events;  // events right after this tick
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

inline void real_sleep(std::chrono::duration<double> d) { std::this_thread::sleep_for(d); }

// Re-emits the logged ticks, paced at dt / speed of wall-clock time. speed == 0 emits
// everything at once. Returns the summary recomputed from the replayed states.
inline TrialSummary replay(const TrialLog& log, double speed, const std::function<void(const ReplayFrame&)>& sink,
                           const Sleeper& sleep = real_sleep) {
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw std::invalid_argument("replay speed must be >= 0");
  if (log.ticks.empty()) throw MalformedLogError("log has no ticks");
  TrialLog seen;
  seen.header = log.header;
  std::size_t ev = 0;
  for (std::size_t k = 0; k < log.ticks.size(); ++k) {
    if (k > 0 && speed > 0.0) sleep(std::chrono::duration<double>(log.header.dt / speed));
    ReplayFrame frame{&log.ticks[k], {}};
    while (ev < log.events.size() && log.events[ev].i == static_cast<long>(k)) {
      frame.events.push_back(&log.events[ev]);
      seen.events.push_back(log.events[ev]);
      ++ev;
    }
    seen.ticks.push_back(log.ticks[k]);
    sink(frame);
  }
  return compute_summary(seen);
}

// ---- cross-trial metrics ----

// Max minus min of signed along-line placement, over trials that share a target.
inline double placement_spread(const std::vector<const TrialLog*>& logs, std::optional<Segment> target = std::nullopt) {
  if (logs.size() < 2) throw std::invalid_argument("placement spread needs at least two trials");
  const Segment seg = target.value_or(logs.front()->header.target);
  double lo = INFINITY, hi = -INFINITY;
  for (const TrialLog* l : logs) {
    if (l->header.target != seg) throw std::invalid_argument("placement spread over trials with different targets");
    if (!l->summary) throw MalformedLogError("log has no summary");
    lo = std::min(lo, l->summary->score.along_line_position);
    hi = std::max(hi, l->summary->score.along_line_position);
  }
  return hi - lo;
}

inline double placement_spread(const std::vector<TrialLog>& logs, std::optional<Segment> target = std::nullopt) {
  std::vector<const TrialLog*> ptrs;
  for (const auto& l : logs) ptrs.push_back(&l);
  return placement_spread(ptrs, target);
}

}  // namespace teer
