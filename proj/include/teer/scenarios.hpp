#pragma once

// Builders for the shipped scenario files. Every script is authored closed loop by the
// virtual operator and then frozen; the files under scenarios/ are the output of
// generate_all() and a test checks that they still match.

#include <functional>
#include <map>

#include "teer/authoring.hpp"

namespace teer::scenarios {

using authoring::HoverGoal;
using authoring::OperatorProfile;
using authoring::ScriptWriter;
using authoring::Variation;

// Where step 2 leaves the intermediate sheath: advanced and flexed back towards the valve
// axis, clip in the middle of the atrium.
struct Step2Goal {
  double is_translation = 30.0;
  double is_bend_ml = -70.0;
};

inline double clip_height(const PlantState& s, const SessionConfig& cfg) {
  return (cfg.phantom.frame.inverse() * clip_pose(s, cfg.plant)).position.z();
}

inline HoverGoal hover_goal(Segment target, const SessionConfig& cfg, const OperatorProfile& prof, double aim_along) {
  const ValvePhantom& ph = cfg.phantom;
  const double s = std::clamp(segment_midpoint(target) + aim_along / ph.arc_length(), 0.0, 1.0);
  HoverGoal g;
  g.target = ph.point_at(s);
  g.height = prof.hover_height;
  return g;
}

// ---- delivery steps ----

inline void step1(ScriptWriter& w) {
  // Transseptal positioning is done before the trial clock starts; only its markers remain.
  w.step_start(1);
  w.step_end(1);
}

inline void step2(ScriptWriter& w, const Step2Goal& goal = {}) {
  const Variation& v = w.variation();
  w.step_start(2);
  w.mode(2);
  const double ins = goal.is_translation + v.stroke_jitter * w.jitter();
  if (w.robotic()) {
    w.robotic_move({{Dof::is_translation, ins}, {Dof::is_bend_ml, goal.is_bend_ml}});
  } else {
    w.manual_move(Dof::is_translation, ins);
    if (v.overshoot != 0.0) w.manual_move(Dof::is_bend_ml, goal.is_bend_ml - v.overshoot);
    w.manual_move(Dof::is_bend_ml, goal.is_bend_ml);
  }
  w.step_end(2);
}

inline void step3(ScriptWriter& w, Segment target) {
  w.step_start(3);
  w.mode(3);
  w.hover(hover_goal(target, w.config(), w.profile(), w.variation().aim_along));
  w.step_end(3);
}

inline double roll_error(const ScriptWriter& w, Segment target) {
  return score_placement(clip_pose(w.state(), w.config().plant), target, w.config().phantom).roll_error;
}

inline void step4(ScriptWriter& w, Segment target) {
  w.step_start(4);
  w.mode(4);
  const double perp = authoring::perpendicular_roll(w.state(), target, w.config(), w.state().dist.distal_roll);
  w.roll_to(perp + w.variation().roll_bias);
  w.step_end(4);
}

// The intermediate tip is knocked sideways; the operator goes back to step 3, re-checks the
// roll, and looks again before carrying on.
inline void correction(ScriptWriter& w, Segment target) {
  const OperatorProfile& prof = w.profile();
  const double a = w.variation().offset_angle;
  w.emit(DisturbItem{{prof.lateral_offset * std::cos(a), prof.lateral_offset * std::sin(a)}});
  w.correction_start();
  w.mode(3);
  w.hover(hover_goal(target, w.config(), prof, w.variation().aim_along));
  if (roll_error(w, target) > prof.twist_tolerance) {
    w.mode(4);
    w.roll_to(authoring::perpendicular_roll(w.state(), target, w.config(), w.state().dist.distal_roll - 90.0));
  }
  w.dwell(prof.inspect_dwell);
  w.correction_end();
}

inline void step5(ScriptWriter& w) {
  const OperatorProfile& prof = w.profile();
  w.step_start(5);
  w.mode(4);
  const double depth = clip_height(w.state(), w.config()) + prof.retract;
  w.translate_ds(depth + w.variation().stroke_jitter * w.jitter());
  w.clip(ClipArms::open);
  w.step_end(5);
}

inline void step6(ScriptWriter& w) {
  w.step_start(6);
  w.mode(4);
  w.translate_ds(-w.profile().retract);
  w.step_end(6);
}

inline void step7(ScriptWriter& w) {
  w.step_start(7);
  w.clip(std::nullopt, Grippers::down);
  w.dwell(w.profile().grippers_time);
  w.step_end(7);
}

inline void step8(ScriptWriter& w) {
  w.step_start(8);
  w.clip(ClipArms::closed);
  w.dwell(w.profile().close_time);
  w.step_end(8);
}

// ---- scripts ----

inline CommandScript header(std::string name, ControlPath control, Segment target, std::uint64_t seed,
                            std::optional<JointState> initial = std::nullopt) {
  CommandScript s;
  s.name = std::move(name);
  s.control = control;
  s.target = target;
  s.seed = seed;
  s.initial_mode = 1;
  s.initial_state = std::move(initial);
  return s;
}

inline CommandScript step2_script(const SessionConfig& cfg, ControlPath p, const Variation& v, std::string name) {
  ScriptWriter w(header(std::move(name), p, Segment::a2p2, v.seed), cfg, {}, v);
  step2(w);
  return w.script();
}

// End of step 2, used as the start of the step-3 comparison.
inline JointState after_step2(const SessionConfig& cfg, const Step2Goal& goal = {}) {
  JointState js = cfg.initial_state;
  js[Dof::is_translation] = goal.is_translation;
  js[Dof::is_bend_ml] = goal.is_bend_ml;
  return js;
}

inline CommandScript step3_script(const SessionConfig& cfg, ControlPath p, Segment target, const Variation& v,
                                  std::string name) {
  CommandScript h = header(std::move(name), p, target, v.seed, after_step2(cfg));
  h.initial_mode = 2;
  ScriptWriter w(h, cfg, {}, v);
  step3(w, target);
  return w.script();
}

// Hovering over the A2P2 midpoint with the arms parallel to the line: the start of the
// steps 4-6 comparison.
inline JointState hover_state(const SessionConfig& cfg, Segment target = Segment::a2p2) {
  PlantState s;
  s.js = after_step2(cfg);
  s.dist.distal_roll = s.js[Dof::ds_rotation_cmd];
  JointState js = authoring::solve_hover(s, hover_goal(target, cfg, {}, 0.0), cfg);
  for (Dof d : kAllDofs) js[d] = std::round(js[d] * 1e6) / 1e6;
  return js;
}

inline CommandScript steps456_script(const SessionConfig& cfg, ControlPath p, const Variation& v, std::string name) {
  CommandScript h = header(std::move(name), p, Segment::a2p2, v.seed, hover_state(cfg));
  h.initial_mode = 3;
  ScriptWriter w(h, cfg, {}, v);
  step4(w, Segment::a2p2);
  step5(w);
  step6(w);
  return w.script();
}

inline CommandScript full_script(const SessionConfig& cfg, ControlPath p, Segment target, const Variation& v,
                                 const OperatorProfile& prof, std::string name) {
  ScriptWriter w(header(std::move(name), p, target, v.seed), cfg, prof, v);
  step1(w);
  step2(w);
  step3(w, target);
  step4(w, target);
  if (!w.robotic()) correction(w, target);
  step5(w);
  step6(w);
  step7(w);
  step8(w);
  return w.script();
}

// ---- variation ----

// Uniform draw in [-1, 1], identical on every standard library.
inline double draw(std::mt19937_64& rng) { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; }

// Variant k of n (k = 1..n). Aiming errors are stratified over [-aim, aim] so a family
// covers its range the way ten real trials would.
inline Variation variant(ControlPath p, int k, int n, double aim, std::mt19937_64& rng) {
  Variation v;
  v.seed = rng();
  const double u = 0.5 * (draw(rng) + 1.0);
  v.aim_along = aim * (-1.0 + 2.0 * (static_cast<double>(k - 1) + u) / static_cast<double>(n));
  v.timing_jitter = 0.15;
  v.stroke_jitter = 1.0;
  v.offset_angle = std::numbers::pi * draw(rng);
  if (p == ControlPath::manual) {
    v.rate_fraction = 0.85 + 0.15 * 0.5 * (draw(rng) + 1.0);
    v.roll_bias = 3.0 * draw(rng);
    v.overshoot = 4.0 * 0.5 * (draw(rng) + 1.0);
  } else {
    v.axis_noise = 0.05;
  }
  return v;
}

struct Aims {
  double manual = 8.0;    // mm
  double robotic = 1.8;   // mm
};

// `size` scripts: the canonical one, then size - 1 perturbed variants.
template <class Build>
std::vector<CommandScript> family(ControlPath p, const std::string& stem, int size, double aim, std::uint64_t seed,
                                  Build build) {
  std::vector<CommandScript> out;
  std::mt19937_64 rng(seed);
  out.push_back(build(Variation{}, stem + "-" + std::string(to_string(p)) + "-canonical"));
  const int n = size - 1;
  for (int k = 1; k <= n; ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "%s-%s-%02d", stem.c_str(), std::string(to_string(p)).c_str(), k);
    out.push_back(build(variant(p, k, n, aim, rng), name));
  }
  return out;
}

inline Scenario step2_scenario(const SessionConfig& cfg, std::uint64_t seed) {
  Scenario sc{"step2", "Step 2: advance and flex the intermediate sheath. Manual handles move one at a time with the device cart free; robotic input runs in Mode 2.", {}, {}};
  for (ControlPath p : {ControlPath::manual, ControlPath::robotic}) {
    auto fam = family(p, "step2", 5, 0.0, seed + (p == ControlPath::robotic), [&](const Variation& v, std::string name) {
      return step2_script(cfg, p, v, std::move(name));
    });
    (p == ControlPath::manual ? sc.manual : sc.robotic) = std::move(fam);
  }
  return sc;
}

inline Scenario step3_scenario(const SessionConfig& cfg, std::uint64_t seed) {
  Scenario sc{"step3", "Step 3: position the clip over A1P1 from the end of step 2. Manual: sequential single-knob moves. Robotic: all Mode 3 inputs held together.", {}, {}};
  for (ControlPath p : {ControlPath::manual, ControlPath::robotic}) {
    auto fam = family(p, "step3", 5, 0.0, seed + 10 + (p == ControlPath::robotic), [&](Variation v, std::string name) {
      v.aim_along = 0.0;  // the pair must reach the same pose
      v.overshoot = 0.0;
      v.axis_noise = 0.0;
      return step3_script(cfg, p, Segment::a1p1, v, std::move(name));
    });
    (p == ControlPath::manual ? sc.manual : sc.robotic) = std::move(fam);
  }
  return sc;
}

inline Scenario steps456_scenario(const SessionConfig& cfg, std::uint64_t seed) {
  Scenario sc{"steps456", "Steps 4-6 over A2P2: roll the clip perpendicular to the line, cross the valve and retract. Manual rolls with hand dither bursts; robotic rolls with the D-pad and automatic dither.", {}, {}};
  for (ControlPath p : {ControlPath::manual, ControlPath::robotic}) {
    auto fam = family(p, "steps456", 5, 0.0, seed + 20 + (p == ControlPath::robotic), [&](const Variation& v, std::string name) {
      return steps456_script(cfg, p, v, std::move(name));
    });
    (p == ControlPath::manual ? sc.manual : sc.robotic) = std::move(fam);
  }
  return sc;
}

inline double total_time(const CommandScript& s, const SessionConfig& cfg) {
  return extract_timings(run_trial(s, cfg)).total;
}

// Manual re-inspection time that puts the canonical robotic/manual total time ratio at
// `ratio` for `target`.
inline double tune_inspect_dwell(const SessionConfig& cfg, Segment target, double ratio) {
  const double robotic = total_time(full_script(cfg, ControlPath::robotic, target, {}, {}, "probe"), cfg);
  auto manual_total = [&](double dwell) {
    OperatorProfile prof;
    prof.inspect_dwell = dwell;
    return total_time(full_script(cfg, ControlPath::manual, target, {}, prof, "probe"), cfg);
  };
  const double want = robotic / ratio;
  double lo = 0.0, hi = 600.0;
  if (manual_total(lo) > want) return lo;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (manual_total(mid) < want ? lo : hi) = mid;
  }
  return std::round(0.5 * (lo + hi) * 100.0) / 100.0;
}

inline Scenario full_scenario(const SessionConfig& cfg, Segment target, std::uint64_t seed, const OperatorProfile& prof,
                              Aims aims = {}) {
  const std::string stem(to_string(target));
  char desc[256];
  std::snprintf(desc, sizeof desc,
                "Steps 1-8 targeting %s, ten trials per control path (canonical script and nine perturbed variants). Manual "
                "trials include a %.0f mm lateral knock and a correction pass (re-inspection %.2f s).",
                stem.c_str(), prof.lateral_offset, prof.inspect_dwell);
  Scenario sc{stem, desc, {}, {}};
  for (ControlPath p : {ControlPath::manual, ControlPath::robotic}) {
    const double aim = p == ControlPath::manual ? aims.manual : aims.robotic;
    const std::uint64_t fseed = seed + 100 + 2 * static_cast<std::uint64_t>(target) + (p == ControlPath::robotic);
    auto fam = family(p, stem, 10, aim, fseed, [&](const Variation& v, std::string name) {
      return full_script(cfg, p, target, v, prof, std::move(name));
    });
    (p == ControlPath::manual ? sc.manual : sc.robotic) = std::move(fam);
  }
  return sc;
}

inline constexpr double kTimeRatio = 0.52;

inline std::vector<Scenario> generate_all(const SessionConfig& cfg, std::uint64_t seed = 2024) {
  OperatorProfile prof;
  prof.inspect_dwell = tune_inspect_dwell(cfg, Segment::a2p2, kTimeRatio);
  std::vector<Scenario> out;
  out.push_back(step2_scenario(cfg, seed));
  out.push_back(step3_scenario(cfg, seed));
  out.push_back(steps456_scenario(cfg, seed));
  for (Segment s : {Segment::a1p1, Segment::a2p2, Segment::a3p3}) out.push_back(full_scenario(cfg, s, seed, prof));
  return out;
}

// ---- calibration ----

struct Calibration {
  double k_couple = 0.0;
  double release_gain = 0.0;
  double step2_sweep = 0.0;             // deg of IS flexure in the canonical manual step-2 script
  double coupled_extension = 0.0;       // mm, canonical manual step 2 after calibration
  double residual_twist = 0.0;          // deg, canonical manual steps 4-6 after calibration
};

inline constexpr double kTargetExtension = 6.0;  // mm
inline constexpr double kTargetTwist = 28.0;     // deg

// Calibrates the coupling gain against the canonical manual step-2 script and the windup
// release gain against the canonical manual steps 4-6 script.
inline Calibration calibrate(SessionConfig cfg, const CommandScript& step2_canonical, const CommandScript& steps456_canonical) {
  Calibration c;
  {
    const TrialLog log = run_trial(step2_canonical, cfg);
    for (std::size_t i = 1; i < log.ticks.size(); ++i) {
      const JointState& a = log.ticks[i - 1].state.js;
      const JointState& b = log.ticks[i].state.js;
      c.step2_sweep += std::abs(b[Dof::is_bend_ml] - a[Dof::is_bend_ml]) + std::abs(b[Dof::is_bend_ap] - a[Dof::is_bend_ap]);
    }
    if (c.step2_sweep <= 0.0) throw std::runtime_error("canonical step-2 script does not flex the intermediate sheath");
    c.k_couple = kTargetExtension / c.step2_sweep;
    cfg.plant.friction.k_couple = c.k_couple;
    c.coupled_extension = run_trial(step2_canonical, cfg).summary->coupled_extension;
  }
  auto twist = [&](double g) {
    cfg.plant.friction.release_gain = g;
    const auto t = run_trial(steps456_canonical, cfg).summary->residual_twist;
    if (!t) throw std::runtime_error("steps 4-6 script has no step 4");
    return *t;
  };
  double lo = 1e-5, hi = 1.0;
  if (twist(lo) > kTargetTwist || twist(hi) < kTargetTwist)
    throw std::runtime_error("residual twist target is outside the reachable range");
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    (twist(mid) < kTargetTwist ? lo : hi) = mid;
  }
  c.release_gain = std::round(std::sqrt(lo * hi) * 1e6) / 1e6;
  c.residual_twist = twist(c.release_gain);
  return c;
}

}  // namespace teer::scenarios
