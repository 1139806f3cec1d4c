#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "teer/json_io.hpp"

namespace teer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Default pose of the transseptal sheath exit: 88 mm above the annulus plane and 25 mm to
// the septal side, pointing straight down with local x towards the valve. Positive TS bend
// steers towards the valve; the IS then bends back (negative M/L) to bring the clip axis
// vertical.
inline Pose default_base_frame() {
  Pose p;
  p.position = Eigen::Vector3d(-25.0, 0.0, 88.0);
  p.orientation = Eigen::Quaterniond(Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()));
  return p;
}

// Start of a trial, i.e. what step 1 leaves behind: transseptal sheath advanced and curved
// towards the valve, intermediate sheath straight, clip arms closed and parallel to the
// coaptation line.
inline JointState default_initial_state() {
  JointState js;
  js[Dof::ts_translation] = 30.0;
  js[Dof::ts_bend] = 120.0;
  js[Dof::is_translation] = 15.0;
  js[Dof::ds_translation] = 10.0;
  js[Dof::ds_rotation_cmd] = -90.0;
  return js;
}

// Coaptation line along world y, so the clip arms at zero roll are perpendicular to it.
inline Pose default_phantom_frame() { return rot_z(90.0); }

struct SessionConfig {
  PlantModel plant;
  ControlSettings control;
  ValvePhantom phantom;
  JointState initial_state = default_initial_state();
  double tick_rate = 100.0;      // Hz
  double snapshot_rate = 30.0;   // Hz
  double stale_input_ms = 100.0;

  SessionConfig() {
    plant.geometry.base_frame = default_base_frame();
    phantom.frame = default_phantom_frame();
  }

  double dt() const { return 1.0 / tick_rate; }

  void validate() const {
    if (!plant.geometry.valid()) throw ConfigError("sheath geometry: lengths must be positive and radii nested");
    if (!plant.friction.valid()) throw ConfigError("friction parameters must be positive with dither_relief < 1");
    if (!control.limits.valid()) throw ConfigError("speed limits must be positive");
    if (!(tick_rate > 0.0)) throw ConfigError("tick_rate must be positive");
    if (!(snapshot_rate > 0.0) || snapshot_rate > tick_rate) throw ConfigError("snapshot_rate must be in (0, tick_rate]");
    if (control.deadzone < 0.0 || control.deadzone >= 1.0) throw ConfigError("deadzone must be in [0, 1)");
    if (plant.dither.amplitude < 0.0 || plant.dither.frequency <= 0.0) throw ConfigError("invalid dither spec");
    if (!plant.limits.within(initial_state)) throw ConfigError("initial_state violates joint limits");
    for (int k = 0; k <= 64; ++k) {
      if (!phantom.inside_annulus(phantom.point_at(k / 64.0)))
        throw ConfigError("coaptation line leaves the annulus");
    }
  }
};

inline json config_to_json(const SessionConfig& c) {
  const auto& g = c.plant.geometry;
  const auto& l = c.plant.limits;
  const auto& f = c.plant.friction;
  const auto& d = c.plant.dither;
  const auto& s = c.control.limits;
  const auto& b = c.control.bindings;
  const auto& ph = c.phantom;
  return json{
      {"geometry",
       {{"transseptal", {{"bend_section_length", g.transseptal.bend_section_length}, {"outer_radius", g.transseptal.outer_radius}}},
        {"intermediate", {{"bend_section_length", g.intermediate.bend_section_length}, {"outer_radius", g.intermediate.outer_radius}}},
        {"device", {{"rigid_length", g.device.bend_section_length}, {"outer_radius", g.device.outer_radius}}},
        {"base_frame", g.base_frame}}},
      {"joint_limits",
       {{"ts_stroke", l.ts_stroke},
        {"is_stroke", l.is_stroke},
        {"ds_stroke", l.ds_stroke},
        {"ts_bend_max", l.ts_bend_max},
        {"is_bend_max", l.is_bend_max}}},
      {"friction",
       {{"k_couple", f.k_couple},
        {"extension_cap", f.extension_cap},
        {"tau_static", f.tau_static},
        {"dither_relief", f.dither_relief},
        {"release_gain", f.release_gain},
        {"windup_cap", f.windup_cap}}},
      {"dither", {{"amplitude", d.amplitude}, {"frequency", d.frequency}, {"reference_amplitude", d.reference_amplitude}}},
      {"speed_limits", {{"flexure_max", s.flexure_max}, {"roll_max", s.roll_max}, {"translation_max", s.translation_max}}},
      {"mode_bindings", {{"X", b.mode[0]}, {"Y", b.mode[1]}, {"A", b.mode[2]}, {"B", b.mode[3]}}},
      {"deadzone", c.control.deadzone},
      {"invert_ap", c.control.invert_ap},
      {"phantom",
       {{"frame", ph.frame},
        {"annulus_semi_axes", {ph.annulus_semi_x, ph.annulus_semi_y}},
        {"coaptation", {{"chord", ph.chord}, {"sagitta", ph.sagitta}, {"chord_y", ph.chord_y}}},
        {"atrium_radius", ph.atrium_radius}}},
      {"initial_state", c.initial_state},
      {"tick_rate", c.tick_rate},
      {"snapshot_rate", c.snapshot_rate},
      {"stale_input_ms", c.stale_input_ms}};
}

// Missing keys keep their defaults, so partial config files are allowed.
inline SessionConfig config_from_json(const json& j) {
  SessionConfig c;
  try {
    if (j.contains("geometry")) {
      const json& g = j.at("geometry");
      auto& geo = c.plant.geometry;
      if (g.contains("transseptal")) {
        geo.transseptal.bend_section_length = g["transseptal"].value("bend_section_length", geo.transseptal.bend_section_length);
        geo.transseptal.outer_radius = g["transseptal"].value("outer_radius", geo.transseptal.outer_radius);
      }
      if (g.contains("intermediate")) {
        geo.intermediate.bend_section_length = g["intermediate"].value("bend_section_length", geo.intermediate.bend_section_length);
        geo.intermediate.outer_radius = g["intermediate"].value("outer_radius", geo.intermediate.outer_radius);
      }
      if (g.contains("device")) {
        geo.device.bend_section_length = g["device"].value("rigid_length", geo.device.bend_section_length);
        geo.device.outer_radius = g["device"].value("outer_radius", geo.device.outer_radius);
      }
      if (g.contains("base_frame")) geo.base_frame = g.at("base_frame").get<Pose>();
    }
    if (j.contains("joint_limits")) {
      const json& l = j.at("joint_limits");
      auto& lim = c.plant.limits;
      lim.ts_stroke = l.value("ts_stroke", lim.ts_stroke);
      lim.is_stroke = l.value("is_stroke", lim.is_stroke);
      lim.ds_stroke = l.value("ds_stroke", lim.ds_stroke);
      lim.ts_bend_max = l.value("ts_bend_max", lim.ts_bend_max);
      lim.is_bend_max = l.value("is_bend_max", lim.is_bend_max);
    }
    if (j.contains("friction")) {
      const json& f = j.at("friction");
      auto& fr = c.plant.friction;
      fr.k_couple = f.value("k_couple", fr.k_couple);
      fr.extension_cap = f.value("extension_cap", fr.extension_cap);
      fr.tau_static = f.value("tau_static", fr.tau_static);
      fr.dither_relief = f.value("dither_relief", fr.dither_relief);
      fr.release_gain = f.value("release_gain", fr.release_gain);
      fr.windup_cap = f.value("windup_cap", fr.windup_cap);
    }
    if (j.contains("dither")) {
      const json& d = j.at("dither");
      auto& ds = c.plant.dither;
      ds.amplitude = d.value("amplitude", ds.amplitude);
      ds.frequency = d.value("frequency", ds.frequency);
      ds.reference_amplitude = d.value("reference_amplitude", ds.reference_amplitude);
    }
    if (j.contains("speed_limits")) {
      const json& s = j.at("speed_limits");
      auto& sl = c.control.limits;
      sl.flexure_max = s.value("flexure_max", sl.flexure_max);
      sl.roll_max = s.value("roll_max", sl.roll_max);
      sl.translation_max = s.value("translation_max", sl.translation_max);
    }
    if (j.contains("mode_bindings")) {
      const json& b = j.at("mode_bindings");
      auto& mb = c.control.bindings.mode;
      mb[0] = b.value("X", mb[0]);
      mb[1] = b.value("Y", mb[1]);
      mb[2] = b.value("A", mb[2]);
      mb[3] = b.value("B", mb[3]);
      for (int m : mb) {
        if (m < 1 || m > 4) throw ConfigError("mode_bindings values must be 1..4");
      }
    }
    c.control.deadzone = j.value("deadzone", c.control.deadzone);
    c.control.invert_ap = j.value("invert_ap", c.control.invert_ap);
    if (j.contains("phantom")) {
      const json& p = j.at("phantom");
      auto& ph = c.phantom;
      if (p.contains("frame")) ph.frame = p.at("frame").get<Pose>();
      if (p.contains("annulus_semi_axes")) {
        ph.annulus_semi_x = p["annulus_semi_axes"].at(0).get<double>();
        ph.annulus_semi_y = p["annulus_semi_axes"].at(1).get<double>();
      }
      if (p.contains("coaptation")) {
        ph.chord = p["coaptation"].value("chord", ph.chord);
        ph.sagitta = p["coaptation"].value("sagitta", ph.sagitta);
        ph.chord_y = p["coaptation"].value("chord_y", ph.chord_y);
      }
      ph.atrium_radius = p.value("atrium_radius", ph.atrium_radius);
    }
    if (j.contains("initial_state")) c.initial_state = j.at("initial_state").get<JointState>();
    c.tick_rate = j.value("tick_rate", c.tick_rate);
    c.snapshot_rate = j.value("snapshot_rate", c.snapshot_rate);
    c.stale_input_ms = j.value("stale_input_ms", c.stale_input_ms);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config schema violation: ") + e.what());
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline SessionConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

// FNV-1a over the canonical (key-sorted, shortest round-trip) JSON dump.
inline std::string config_hash(const SessionConfig& c) {
  const std::string text = config_to_json(c).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace teer
