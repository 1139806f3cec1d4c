#pragma once

// JSON conversions for the core value types. Field names here are the wire and log
// schema; schema/teer.schema.json documents them.

#include <nlohmann/json.hpp>
#include <string>

#include "teer/control.hpp"
#include "teer/hid.hpp"
#include "teer/phantom.hpp"
#include "teer/plant.hpp"

namespace teer {

using nlohmann::json;

inline json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Eigen::Vector3d vec3_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw json::type_error::create(302, "expected a 3-vector", &j);
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline void to_json(json& j, const Pose& p) {
  const auto& q = p.orientation;
  j = json{{"position", vec3_to_json(p.position)}, {"orientation", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

inline void from_json(const json& j, Pose& p) {
  p.position = vec3_from_json(j.at("position"));
  const json& q = j.at("orientation");
  if (!q.is_array() || q.size() != 4) throw json::type_error::create(302, "orientation must be [w,x,y,z]", &q);
  p.orientation = Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  const double n = p.orientation.norm();
  if (!(n > 0.0)) throw json::type_error::create(302, "zero quaternion", &q);
  // Leave already-unit quaternions bit-exact so poses round-trip through JSON.
  if (std::abs(n - 1.0) > 1e-12) p.orientation.normalize();
}

inline void to_json(json& j, const DofVector& v) {
  j = json::object();
  for (Dof d : kAllDofs) j[std::string(dof_name(d))] = v[d];
}

inline void from_json(const json& j, DofVector& v) {
  v = {};
  for (auto it = j.begin(); it != j.end(); ++it) v[dof_from_name(it.key())] = it.value().get<double>();
}

inline void to_json(json& j, const JointState& js) {
  to_json(j, js.q);
  j["clip_arms"] = to_string(js.clip_arms);
  j["grippers"] = to_string(js.grippers);
  j["clip"] = to_string(js.clip);
}

inline void from_json(const json& j, JointState& js) {
  js = {};
  for (Dof d : kAllDofs) js[d] = j.value(std::string(dof_name(d)), 0.0);
  js.clip_arms = j.value("clip_arms", std::string("closed")) == "open" ? ClipArms::open : ClipArms::closed;
  js.grippers = j.value("grippers", std::string("up")) == "down" ? Grippers::down : Grippers::up;
  js.clip = j.value("clip", std::string("attached")) == "released" ? ClipAttachment::released : ClipAttachment::attached;
}

inline void to_json(json& j, const DisturbanceState& d) {
  j = json{{"windup", d.windup},
           {"distal_roll", d.distal_roll},
           {"coupled_extension", d.coupled_extension},
           {"dither_active", d.dither_active},
           {"dither_phase", d.dither_phase},
           {"dither_offset", d.dither_offset},
           {"lateral_deflection", d.lateral_deflection}};
}

inline void from_json(const json& j, DisturbanceState& d) {
  d = {};
  d.windup = j.at("windup").get<double>();
  d.distal_roll = j.at("distal_roll").get<double>();
  d.coupled_extension = j.at("coupled_extension").get<double>();
  d.dither_active = j.at("dither_active").get<bool>();
  d.dither_phase = j.at("dither_phase").get<double>();
  d.dither_offset = j.at("dither_offset").get<double>();
  d.lateral_deflection = j.at("lateral_deflection").get<std::array<double, 2>>();
}

inline void to_json(json& j, const VelocityCommand& c) {
  to_json(j, c.rate);
  j["dither_requested"] = c.dither_requested;
}

inline void from_json(const json& j, VelocityCommand& c) {
  c = {};
  for (Dof d : kAllDofs) c.rate[d] = j.value(std::string(dof_name(d)), 0.0);
  c.dither_requested = j.value("dither_requested", false);
}

inline void to_json(json& j, const GamepadFrame& f) {
  j = json{{"left_stick", {f.left_stick.x, f.left_stick.y}},
           {"right_stick", {f.right_stick.x, f.right_stick.y}},
           {"dpad", {{"up", f.dpad.up}, {"down", f.dpad.down}, {"left", f.dpad.left}, {"right", f.dpad.right}}},
           {"triggers", {f.triggers.left, f.triggers.right}},
           {"buttons", {{"X", f.buttons.x}, {"Y", f.buttons.y}, {"A", f.buttons.a}, {"B", f.buttons.b}}},
           {"timestamp", f.timestamp}};
}

namespace detail {
inline std::array<double, 2> pair_or_zero(const json& j, const char* key) {
  if (!j.contains(key)) return {0.0, 0.0};
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw MalformedInputError(std::string(key) + " must be a 2-element array");
  return {v[0].get<double>(), v[1].get<double>()};
}
}  // namespace detail

// Missing members read as neutral input. Wrong types raise MalformedInputError.
inline void from_json(const json& j, GamepadFrame& f) {
  if (!j.is_object()) throw MalformedInputError("gamepad frame must be an object");
  try {
    f = {};
    const auto ls = detail::pair_or_zero(j, "left_stick");
    const auto rs = detail::pair_or_zero(j, "right_stick");
    const auto tr = detail::pair_or_zero(j, "triggers");
    f.left_stick = {ls[0], ls[1]};
    f.right_stick = {rs[0], rs[1]};
    f.triggers = {tr[0], tr[1]};
    if (j.contains("dpad")) {
      const json& d = j.at("dpad");
      f.dpad = {d.value("up", false), d.value("down", false), d.value("left", false), d.value("right", false)};
    }
    if (j.contains("buttons")) {
      const json& b = j.at("buttons");
      f.buttons = {b.value("X", false), b.value("Y", false), b.value("A", false), b.value("B", false)};
    }
    f.timestamp = j.value("timestamp", 0.0);
  } catch (const json::exception& e) {
    throw MalformedInputError(std::string("malformed gamepad frame: ") + e.what());
  }
}

inline void to_json(json& j, const ManualAction& a) {
  j = json{{"dof", a.dof ? json(std::string(dof_name(*a.dof))) : json(nullptr)},
           {"rate", a.rate},
           {"hand_dither", a.hand_dither}};
}

inline void from_json(const json& j, ManualAction& a) {
  a = {};
  if (j.contains("dof") && !j.at("dof").is_null()) a.dof = dof_from_name(j.at("dof").get<std::string>());
  a.rate = j.value("rate", 0.0);
  a.hand_dither = j.value("hand_dither", false);
}

inline void to_json(json& j, const PlacementScore& s) {
  j = json{{"along_line_error", s.along_line_error},
           {"off_line_error", s.off_line_error},
           {"axis_tilt", s.axis_tilt},
           {"roll_error", s.roll_error},
           {"along_line_position", s.along_line_position}};
}

inline void from_json(const json& j, PlacementScore& s) {
  s.along_line_error = j.at("along_line_error").get<double>();
  s.off_line_error = j.at("off_line_error").get<double>();
  s.axis_tilt = j.at("axis_tilt").get<double>();
  s.roll_error = j.at("roll_error").get<double>();
  s.along_line_position = j.at("along_line_position").get<double>();
}

}  // namespace teer
