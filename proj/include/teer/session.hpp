#pragma once

// Live session core and the wire messages of the cockpit channel. Everything here is
// synchronous and clock-free: the server feeds it messages and calls tick() at the tick
// rate, tests call it directly.

#include <deque>
#include <variant>

#include "teer/trials.hpp"

namespace teer {

inline constexpr std::string_view kWireVersion = "teer-wire/1";

enum class Role { driver, observer };

constexpr std::string_view to_string(Role r) { return r == Role::driver ? "driver" : "observer"; }

// ---- client -> server ----

struct InputFrame {
  GamepadFrame frame;
};

struct ModeSelect {
  ModeButton button = ModeButton::X;
};

enum class TrialAction { start, stop, reset, step_start, step_end, correction_start, correction_end };

constexpr std::string_view to_string(TrialAction a) {
  switch (a) {
    case TrialAction::start: return "start";
    case TrialAction::stop: return "stop";
    case TrialAction::reset: return "reset";
    case TrialAction::step_start: return "step_start";
    case TrialAction::step_end: return "step_end";
    case TrialAction::correction_start: return "correction_start";
    case TrialAction::correction_end: return "correction_end";
  }
  return "?";
}

struct TrialControl {
  TrialAction action = TrialAction::start;
  ControlPath control = ControlPath::robotic;
  Segment target = Segment::a2p2;
  int step = 0;  // step markers only
};

using ClientPayload = std::variant<InputFrame, ModeSelect, TrialControl>;

struct ClientMessage {
  std::uint64_t seq = 0;
  std::optional<std::string> session;
  ClientPayload payload;
};

inline TrialAction trial_action_from_string(std::string_view s) {
  for (TrialAction a : {TrialAction::start, TrialAction::stop, TrialAction::reset, TrialAction::step_start,
                        TrialAction::step_end, TrialAction::correction_start, TrialAction::correction_end}) {
    if (to_string(a) == s) return a;
  }
  throw MalformedInputError("unknown trial action '" + std::string(s) + "'");
}

inline ClientMessage parse_client_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedInputError(std::string("message is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedInputError("message must be a JSON object");
  try {
    ClientMessage m;
    if (!j.contains("seq") || !j.at("seq").is_number_unsigned()) throw MalformedInputError("message needs an unsigned seq");
    m.seq = j.at("seq").get<std::uint64_t>();
    if (j.contains("session")) m.session = j.at("session").get<std::string>();
    const std::string type = j.at("type").get<std::string>();
    if (type == "input") {
      m.payload = InputFrame{j.at("frame").get<GamepadFrame>()};
    } else if (type == "mode") {
      m.payload = ModeSelect{mode_button_from_string(j.at("button").get<std::string>())};
    } else if (type == "trial") {
      TrialControl c;
      c.action = trial_action_from_string(j.at("action").get<std::string>());
      c.control = control_path_from_string(j.value("control", std::string("robotic")));
      c.target = segment_from_string(j.value("target", std::string("a2p2")));
      c.step = j.value("step", 0);
      if ((c.action == TrialAction::step_start || c.action == TrialAction::step_end) && (c.step < 1 || c.step > 8))
        throw MalformedInputError("step markers need a step in 1..8");
      m.payload = c;
    } else {
      throw MalformedInputError("unknown message type '" + type + "'");
    }
    return m;
  } catch (const json::exception& e) {
    throw MalformedInputError(std::string("message schema violation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedInputError(std::string("message schema violation: ") + e.what());
  }
}

inline json client_message_to_json(const ClientMessage& m) {
  json j{{"seq", m.seq}};
  if (m.session) j["session"] = *m.session;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InputFrame>) {
          j["type"] = "input";
          j["frame"] = p.frame;
        } else if constexpr (std::is_same_v<T, ModeSelect>) {
          j["type"] = "mode";
          j["button"] = std::string(to_string(p.button));
        } else {
          j["type"] = "trial";
          j["action"] = std::string(to_string(p.action));
          j["control"] = std::string(to_string(p.control));
          j["target"] = std::string(to_string(p.target));
          if (p.action == TrialAction::step_start || p.action == TrialAction::step_end) j["step"] = p.step;
        }
      },
      m.payload);
  return j;
}

// ---- server -> client ----

// Body of a Snapshot. Self-contained: a client that missed messages can rebuild its whole
// view from any one of them.
struct SnapshotBody {
  double t = 0.0;
  long tick = 0;
  PlantState state;
  Pose clip;
  double ds_effective = 0.0;
  std::optional<int> mode;
  VelocityCommand command;
  std::optional<GamepadFrame> input;
  Segment target = Segment::a2p2;
  PlacementScore score;
  bool recording = false;
  int step = 0;
  bool correction = false;
  bool driver_connected = false;
};

inline json dofset_json(const DofSet& s) {
  json a = json::array();
  for (Dof d : kAllDofs)
    if (s.contains(d)) a.push_back(std::string(dof_name(d)));
  return a;
}

inline json snapshot_body_json(const SnapshotBody& b) {
  json j{{"t", b.t},
         {"tick", b.tick},
         {"joints", b.state.js},
         {"clip", b.clip},
         {"ds_effective", b.ds_effective},
         {"disturbance", b.state.dist},
         {"command", b.command},
         {"input", b.input ? json(*b.input) : json(nullptr)},
         {"target", std::string(to_string(b.target))},
         {"score", b.score},
         {"trial", {{"recording", b.recording}, {"step", b.step}, {"correction", b.correction}}},
         {"driver_connected", b.driver_connected}};
  if (b.mode) {
    const ControlMode m = control_mode(*b.mode);
    j["mode"] = *b.mode;
    j["enabled_dofs"] = dofset_json(m.enabled_dofs);
    const auto tj = trigger_joint(m.trigger_translation_set);
    j["trigger_joint"] = tj ? json(std::string(dof_name(*tj))) : json(nullptr);
  } else {
    j["mode"] = nullptr;
    j["enabled_dofs"] = json::array();
    j["trigger_joint"] = nullptr;
  }
  return j;
}

// Numbers outgoing messages. Each message kind has its own gapless sequence.
class Sequencer {
 public:
  explicit Sequencer(std::string session) : session_(std::move(session)) {}
  const std::string& session() const { return session_; }

  json snapshot(const SnapshotBody& b) {
    json j = snapshot_body_json(b);
    j["type"] = "snapshot";
    j["session"] = session_;
    j["seq"] = snapshots_++;
    return j;
  }

  json event(double t, std::string kind, json data = json::object()) {
    return json{{"type", "event"}, {"session", session_}, {"seq", events_++}, {"t", t}, {"kind", std::move(kind)},
                {"data", std::move(data)}};
  }

 private:
  std::string session_;
  std::uint64_t snapshots_ = 0;
  std::uint64_t events_ = 0;
};

// True on the ticks where a snapshot is due, spreading snapshot_rate over tick_rate.
inline bool snapshot_due(long tick, double tick_rate, double snapshot_rate) {
  if (tick == 0) return true;
  const auto slot = [&](long k) { return std::floor(static_cast<double>(k) * snapshot_rate / tick_rate + 1e-9); };
  return slot(tick) != slot(tick - 1);
}

// What a server drives: produces messages tick by tick and consumes driver input.
class MessageSource {
 public:
  virtual ~MessageSource() = default;
  virtual double dt() const = 0;
  virtual std::vector<json> tick() = 0;
  // Latest snapshot, for a client that just connected.
  virtual json latest_snapshot() const = 0;
  virtual bool accepts_driver() const = 0;
  virtual void driver_connected() {}
  virtual std::vector<json> driver_message(const ClientMessage&) { return {}; }
  virtual void driver_gone() {}
  virtual bool finished() const { return false; }
};

// Live simulation driven by one operator over the robotic path.
class SessionCore : public MessageSource {
 public:
  SessionCore(SessionConfig cfg, std::string session_id)
      : cfg_(std::move(cfg)), seq_(std::move(session_id)), ctl_(cfg_.control, 1) {
    cfg_.validate();
    reset_state();
    latest_ = seq_.snapshot(body());
  }

  const SessionConfig& config() const { return cfg_; }
  const std::string& session_id() const { return seq_.session(); }
  const PlantState& state() const { return state_; }
  const RoboticController& controller() const { return ctl_; }
  double now() const { return static_cast<double>(tick_) * cfg_.dt(); }
  long ticks() const { return tick_; }
  const std::optional<TrialLog>& last_log() const { return last_log_; }

  double dt() const override { return cfg_.dt(); }
  json latest_snapshot() const override { return latest_; }
  bool accepts_driver() const override { return true; }

  void driver_connected() override {
    driver_ = true;
    pending_.push_back(seq_.event(now(), "driver_connected"));
  }

  void driver_gone() override {
    driver_ = false;
    ctl_.clear_input();
    input_.reset();
    fresh_.reset();  // a frame that arrived just before the disconnect must not latch
    pending_.push_back(seq_.event(now(), "driver_disconnected"));
  }

  // Applies one driver message. Returns immediate events (marker echoes, trial results).
  std::vector<json> driver_message(const ClientMessage& m) override {
    if (m.session && *m.session != session_id()) throw MalformedInputError("message for another session");
    if (last_client_seq_ && m.seq <= *last_client_seq_) throw MalformedInputError("client seq must increase");
    last_client_seq_ = m.seq;
    std::vector<json> out;
    if (const auto* in = std::get_if<InputFrame>(&m.payload)) {
      fresh_ = in->frame;
      input_received_ = now();
    } else if (const auto* ms = std::get_if<ModeSelect>(&m.payload)) {
      const int id = ctl_.select(ms->button);
      input_.reset();
      if (rec_) rec_->event("mode_change", {{"mode", id}});
      out.push_back(mode_event(id));
    } else {
      trial_control(std::get<TrialControl>(m.payload), out);
    }
    return out;
  }

  std::vector<json> tick() override {
    std::vector<json> out(std::make_move_iterator(pending_.begin()), std::make_move_iterator(pending_.end()));
    pending_.clear();
    // Input goes stale if the driver stops sending.
    if (!fresh_ && input_ && now() - input_received_ > cfg_.stale_input_ms / 1000.0 + 1e-9) {
      ctl_.clear_input();
      input_.reset();
    }
    std::optional<GamepadFrame> fresh = std::move(fresh_);
    fresh_.reset();
    if (fresh) input_ = *fresh;
    RoboticController::Output o;
    try {
      o = ctl_.tick(fresh);
    } catch (const MalformedInputError& e) {
      input_.reset();
      ctl_.clear_input();
      out.push_back(seq_.event(now(), "error", {{"message", e.what()}}));
    }
    if (o.mode_changed_to) input_.reset();
    cmd_ = o.cmd;
    state_ = step_robotic(state_, cmd_, cfg_.dt(), cfg_.plant);
    ++tick_;
    if (rec_) {
      const std::size_t before = rec_->log().events.size();
      rec_->tick(cmd_, state_, ctl_.mode().id);
      for (std::size_t k = before; k < rec_->log().events.size(); ++k) {
        const auto& e = rec_->log().events[k];
        out.push_back(seq_.event(now(), e.type, e.data));
      }
      if (o.mode_changed_to) rec_->event("mode_change", {{"mode", *o.mode_changed_to}});
    }
    if (o.mode_changed_to) out.push_back(mode_event(*o.mode_changed_to));
    if (snapshot_due(tick_, cfg_.tick_rate, cfg_.snapshot_rate)) {
      latest_ = seq_.snapshot(body());
      out.push_back(latest_);
    }
    return out;
  }

 private:
  json mode_event(int id) { return seq_.event(now(), "mode_change", {{"mode", id}}); }

  void reset_state() {
    state_ = PlantState{};
    state_.js = cfg_.initial_state;
    state_.dist.distal_roll = state_.js[Dof::ds_rotation_cmd];
    ctl_ = RoboticController(cfg_.control, 1);
    cmd_ = {};
    input_.reset();
    fresh_.reset();
  }

  void trial_control(const TrialControl& c, std::vector<json>& out) {
    switch (c.action) {
      case TrialAction::start:
        if (c.control != ControlPath::robotic)
          throw MalformedInputError("live sessions run the robotic path; manual trials are scripted");
        reset_state();
        target_ = c.target;
        rec_.emplace(cfg_, ControlPath::robotic, c.target, 0, "live-" + session_id(), state_, ctl_.mode().id);
        rec_->set_enforce_modes(false);
        out.push_back(seq_.event(now(), "trial_started", {{"target", std::string(to_string(c.target))}}));
        break;
      case TrialAction::stop: {
        if (!rec_) throw MalformedInputError("no trial is running");
        try {
          last_log_ = rec_->finish();
          out.push_back(seq_.event(now(), "trial_stopped", {{"summary", *last_log_->summary}}));
        } catch (const std::runtime_error& e) {
          // Open interval or an unusable timeline: the recording is discarded.
          out.push_back(seq_.event(now(), "error", {{"message", std::string("trial discarded: ") + e.what()}}));
        }
        rec_.reset();
        break;
      }
      case TrialAction::reset:
        rec_.reset();
        reset_state();
        out.push_back(seq_.event(now(), "reset"));
        break;
      default: {
        if (!rec_) throw MalformedInputError("markers need a running trial");
        static constexpr MarkerKind kinds[] = {MarkerKind::step_start, MarkerKind::step_end,
                                               MarkerKind::correction_start, MarkerKind::correction_end};
        const MarkerKind kind = kinds[static_cast<int>(c.action) - static_cast<int>(TrialAction::step_start)];
        const std::size_t before = rec_->log().events.size();
        try {
          rec_->marker(kind, c.step);
        } catch (const ScriptError& e) {
          out.push_back(seq_.event(now(), "error", {{"message", e.what()}}));
          break;
        }
        for (std::size_t k = before; k < rec_->log().events.size(); ++k)
          out.push_back(seq_.event(now(), rec_->log().events[k].type, rec_->log().events[k].data));
        break;
      }
    }
  }

  SnapshotBody body() const {
    SnapshotBody b;
    b.t = now();
    b.tick = tick_;
    b.state = state_;
    b.clip = clip_pose(state_, cfg_.plant);
    b.ds_effective = effective_ds_translation(state_);
    b.mode = ctl_.mode().id;
    b.command = cmd_;
    b.input = input_;
    b.target = target_;
    b.score = score_placement(b.clip, target_, cfg_.phantom);
    b.recording = rec_.has_value();
    b.step = rec_ ? rec_->current_step() : 0;
    b.correction = rec_ && rec_->in_correction();
    b.driver_connected = driver_;
    return b;
  }

  SessionConfig cfg_;
  Sequencer seq_;
  RoboticController ctl_;
  PlantState state_;
  VelocityCommand cmd_;
  std::optional<GamepadFrame> fresh_;  // received since the last tick
  std::optional<GamepadFrame> input_;  // frame currently driving, as received
  double input_received_ = 0.0;
  std::optional<std::uint64_t> last_client_seq_;
  long tick_ = 0;
  bool driver_ = false;
  Segment target_ = Segment::a2p2;
  std::optional<TrialRecorder> rec_;
  std::optional<TrialLog> last_log_;
  std::vector<json> pending_;
  json latest_;
};

// Streams a finished trial as if it were live. Observers only.
class ReplaySource : public MessageSource {
 public:
  ReplaySource(const TrialLog& log, double speed, std::string session_id)
      : log_(log), cfg_(config_from_json(log.header.config)), seq_(std::move(session_id)), speed_(speed) {
    if (!(speed > 0.0) || !std::isfinite(speed)) throw std::invalid_argument("replay speed must be positive");
    if (log_.ticks.empty()) throw MalformedLogError("log has no ticks");
    latest_ = seq_.snapshot(body(0));
  }

  double dt() const override { return log_.header.dt / speed_; }
  json latest_snapshot() const override { return latest_; }
  bool accepts_driver() const override { return false; }
  bool finished() const override { return next_ >= log_.ticks.size(); }

  std::vector<json> tick() override {
    std::vector<json> out;
    if (finished()) return out;
    const std::size_t k = next_++;
    if (k > 0) {
      while (event_ < log_.events.size() && static_cast<std::size_t>(log_.events[event_].i) < k) {
        const auto& e = log_.events[event_++];
        out.push_back(seq_.event(e.t, e.type, e.data));
      }
    }
    const bool last = k + 1 == log_.ticks.size();
    if (k > 0 && (last || snapshot_due(static_cast<long>(k), cfg_.tick_rate, cfg_.snapshot_rate))) {
      latest_ = seq_.snapshot(body(k));
      out.push_back(latest_);
    }
    if (last) {
      while (event_ < log_.events.size()) {
        const auto& e = log_.events[event_++];
        out.push_back(seq_.event(e.t, e.type, e.data));
      }
      out.push_back(seq_.event(log_.ticks[k].t, "replay_finished", {{"summary", compute_summary(log_)}}));
    }
    return out;
  }

 private:
  SnapshotBody body(std::size_t k) const {
    const TickRecord& t = log_.ticks[k];
    SnapshotBody b;
    b.t = t.t;
    b.tick = t.i;
    b.state = t.state;
    b.clip = t.clip;
    b.ds_effective = t.ds_effective;
    b.mode = t.mode;
    b.command = t.cmd;
    b.target = log_.header.target;
    b.score = score_placement(t.clip, log_.header.target, cfg_.phantom);
    b.recording = true;
    b.step = t.step;
    b.correction = t.correction;
    return b;
  }

  const TrialLog& log_;
  SessionConfig cfg_;
  Sequencer seq_;
  double speed_;
  std::size_t next_ = 0;
  std::size_t event_ = 0;
  json latest_;
};

}  // namespace teer
