#pragma once

// Command scripts: the headless stand-in for an operator. A script is a flat timeline of
// items; timed items (frames, actions, waits) consume ticks, the rest are instantaneous.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "teer/json_io.hpp"

namespace teer {

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ControlPath { manual, robotic };

constexpr std::string_view to_string(ControlPath p) { return p == ControlPath::manual ? "manual" : "robotic"; }

inline ControlPath control_path_from_string(std::string_view s) {
  if (s == "manual") return ControlPath::manual;
  if (s == "robotic") return ControlPath::robotic;
  throw std::invalid_argument("control path must be manual or robotic, got '" + std::string(s) + "'");
}

enum class MarkerKind { step_start, step_end, correction_start, correction_end };

constexpr std::string_view to_string(MarkerKind k) {
  switch (k) {
    case MarkerKind::step_start: return "step_start";
    case MarkerKind::step_end: return "step_end";
    case MarkerKind::correction_start: return "correction_start";
    case MarkerKind::correction_end: return "correction_end";
  }
  return "?";
}

inline MarkerKind marker_kind_from_string(std::string_view s) {
  for (MarkerKind k : {MarkerKind::step_start, MarkerKind::step_end, MarkerKind::correction_start,
                       MarkerKind::correction_end}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown marker '" + std::string(s) + "'");
}

// Robotic path: a gamepad frame held for `duration`. It arrives as fresh input on the
// first tick and stays latched for the rest.
struct FrameItem {
  GamepadFrame frame;
  double duration = 0.0;
};

// Manual path: one handle adjustment held for `duration`.
struct ActionItem {
  ManualAction action;
  double duration = 0.0;
};

// No input for `duration`. Robotic: a neutral frame. Manual: hands off.
struct WaitItem {
  double duration = 0.0;
};

// Robotic path: a mode button press. Takes one tick.
struct ModeItem {
  ModeButton button = ModeButton::X;
};

struct MarkerItem {
  MarkerKind kind = MarkerKind::step_start;
  int step = 0;  // steps only
};

// Clip arm, gripper and release mechanics. Not motorized, so they are instantaneous.
struct ClipItem {
  std::optional<ClipArms> arms;
  std::optional<Grippers> grippers;
  std::optional<ClipAttachment> attachment;
};

// Lateral deflection of the intermediate sheath tip (mm, tip frame), added to the
// current deflection.
struct DisturbItem {
  std::array<double, 2> lateral_offset{};
};

using ScriptItem = std::variant<FrameItem, ActionItem, WaitItem, ModeItem, MarkerItem, ClipItem, DisturbItem>;

struct CommandScript {
  std::string name;
  ControlPath control = ControlPath::robotic;
  Segment target = Segment::a2p2;
  std::uint64_t seed = 0;
  int initial_mode = 1;
  std::optional<JointState> initial_state;  // overrides the config when set
  std::vector<ScriptItem> items;
};

inline long duration_ticks(double duration, double dt) {
  if (!std::isfinite(duration) || duration < 0.0) throw ScriptError("item duration must be finite and >= 0");
  return std::lround(duration / dt);
}

inline json item_to_json(const ScriptItem& item) {
  return std::visit(
      [](const auto& it) -> json {
        using T = std::decay_t<decltype(it)>;
        if constexpr (std::is_same_v<T, FrameItem>) {
          json f = it.frame;
          f.erase("timestamp");
          return {{"frame", f}, {"duration", it.duration}};
        } else if constexpr (std::is_same_v<T, ActionItem>) {
          return {{"action", it.action}, {"duration", it.duration}};
        } else if constexpr (std::is_same_v<T, WaitItem>) {
          return {{"wait", it.duration}};
        } else if constexpr (std::is_same_v<T, ModeItem>) {
          return {{"mode", std::string(to_string(it.button))}};
        } else if constexpr (std::is_same_v<T, MarkerItem>) {
          json j{{"marker", std::string(to_string(it.kind))}};
          if (it.kind == MarkerKind::step_start || it.kind == MarkerKind::step_end) j["step"] = it.step;
          return j;
        } else if constexpr (std::is_same_v<T, ClipItem>) {
          json j = json::object();
          if (it.arms) j["arms"] = to_string(*it.arms);
          if (it.grippers) j["grippers"] = to_string(*it.grippers);
          if (it.attachment) j["attachment"] = to_string(*it.attachment);
          return {{"clip", j}};
        } else {
          return {{"lateral_offset", it.lateral_offset}};
        }
      },
      item);
}

inline ScriptItem item_from_json(const json& j) {
  if (!j.is_object()) throw ScriptError("script item must be an object");
  if (j.contains("frame")) return FrameItem{j.at("frame").get<GamepadFrame>(), j.at("duration").get<double>()};
  if (j.contains("action")) return ActionItem{j.at("action").get<ManualAction>(), j.at("duration").get<double>()};
  if (j.contains("wait")) return WaitItem{j.at("wait").get<double>()};
  if (j.contains("mode")) return ModeItem{mode_button_from_string(j.at("mode").get<std::string>())};
  if (j.contains("marker")) {
    MarkerItem m{marker_kind_from_string(j.at("marker").get<std::string>()), j.value("step", 0)};
    if ((m.kind == MarkerKind::step_start || m.kind == MarkerKind::step_end) && (m.step < 1 || m.step > 8))
      throw ScriptError("step markers need a step in 1..8");
    return m;
  }
  if (j.contains("clip")) {
    const json& c = j.at("clip");
    ClipItem it;
    if (c.contains("arms")) {
      const auto v = c.at("arms").get<std::string>();
      if (v != "open" && v != "closed") throw ScriptError("clip arms must be open or closed");
      it.arms = v == "open" ? ClipArms::open : ClipArms::closed;
    }
    if (c.contains("grippers")) {
      const auto v = c.at("grippers").get<std::string>();
      if (v != "up" && v != "down") throw ScriptError("grippers must be up or down");
      it.grippers = v == "down" ? Grippers::down : Grippers::up;
    }
    if (c.contains("attachment")) {
      const auto v = c.at("attachment").get<std::string>();
      if (v != "attached" && v != "released") throw ScriptError("attachment must be attached or released");
      it.attachment = v == "released" ? ClipAttachment::released : ClipAttachment::attached;
    }
    return it;
  }
  if (j.contains("lateral_offset")) return DisturbItem{j.at("lateral_offset").get<std::array<double, 2>>()};
  throw ScriptError("unrecognised script item: " + j.dump());
}

inline json script_to_json(const CommandScript& s) {
  json j{{"name", s.name},
         {"control", std::string(to_string(s.control))},
         {"target", std::string(to_string(s.target))},
         {"seed", s.seed},
         {"initial_mode", s.initial_mode}};
  if (s.initial_state) j["initial_state"] = *s.initial_state;
  json items = json::array();
  for (const auto& it : s.items) items.push_back(item_to_json(it));
  j["items"] = std::move(items);
  return j;
}

inline CommandScript script_from_json(const json& j) {
  CommandScript s;
  try {
    s.name = j.value("name", std::string());
    s.control = control_path_from_string(j.at("control").get<std::string>());
    s.target = segment_from_string(j.value("target", std::string("a2p2")));
    s.seed = j.value("seed", std::uint64_t{0});
    s.initial_mode = j.value("initial_mode", 1);
    if (s.initial_mode < 1 || s.initial_mode > 4) throw ScriptError("initial_mode must be 1..4");
    if (j.contains("initial_state")) s.initial_state = j.at("initial_state").get<JointState>();
    for (const json& item : j.at("items")) s.items.push_back(item_from_json(item));
  } catch (const json::exception& e) {
    throw ScriptError(std::string("script schema violation: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ScriptError(std::string("script schema violation: ") + e.what());
  } catch (const MalformedInputError& e) {
    throw ScriptError(std::string("script schema violation: ") + e.what());
  }
  for (const auto& it : s.items) {
    const bool robotic_only = std::holds_alternative<FrameItem>(it) || std::holds_alternative<ModeItem>(it);
    if (s.control == ControlPath::manual && robotic_only) throw ScriptError("manual script contains gamepad input");
    if (s.control == ControlPath::robotic && std::holds_alternative<ActionItem>(it))
      throw ScriptError("robotic script contains a manual action");
  }
  return s;
}

// A scenario bundles script families: for each control path, a list of scripts (the
// canonical script first, then its perturbed variants).
struct Scenario {
  std::string name;
  std::string description;
  std::vector<CommandScript> manual;
  std::vector<CommandScript> robotic;

  const std::vector<CommandScript>& family(ControlPath p) const { return p == ControlPath::manual ? manual : robotic; }
};

inline json scenario_to_json(const Scenario& sc) {
  json j{{"name", sc.name}, {"description", sc.description}};
  j["manual"] = json::array();
  j["robotic"] = json::array();
  for (const auto& s : sc.manual) j["manual"].push_back(script_to_json(s));
  for (const auto& s : sc.robotic) j["robotic"].push_back(script_to_json(s));
  return j;
}

inline Scenario scenario_from_json(const json& j) {
  Scenario sc;
  if (!j.is_object()) throw ScriptError("scenario must be a JSON object");
  sc.name = j.value("name", std::string());
  sc.description = j.value("description", std::string());
  for (const char* key : {"manual", "robotic"}) {
    if (!j.contains(key)) continue;
    auto& fam = std::string(key) == "manual" ? sc.manual : sc.robotic;
    for (const json& s : j.at(key)) {
      fam.push_back(script_from_json(s));
      if (fam.back().control != control_path_from_string(key))
        throw ScriptError("script '" + fam.back().name + "' listed under " + key + " has the wrong control path");
    }
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScriptError("cannot open scenario " + path.string());
  try {
    return scenario_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ScriptError(path.string() + ": " + e.what());
  }
}

}  // namespace teer
