#pragma once

// Trial logs: JSON lines, header first, then ticks and events in time order, then a
// summary. Everything in the summary can be recomputed from the header and ticks.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "teer/config.hpp"
#include "teer/script.hpp"

namespace teer {

inline constexpr std::string_view kLogFormat = "teer-trial-log/1";

class MalformedLogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogHeader {
  std::string config_hash;
  ControlPath control = ControlPath::robotic;
  Segment target = Segment::a2p2;
  std::uint64_t seed = 0;
  std::string script;
  double dt = 0.01;
  json config;  // full SessionConfig, so a log can be analysed on its own
};

struct TickRecord {
  long i = 0;
  double t = 0.0;
  int step = 0;             // active step, 0 if none
  bool correction = false;  // inside a correction interval
  std::optional<int> mode;  // robotic path only
  VelocityCommand cmd;
  PlantState state;
  Pose clip;
  double ds_effective = 0.0;
};

// Events happen at the instant after tick `i`.
struct EventRecord {
  long i = 0;
  double t = 0.0;
  std::string type;  // step_start, step_end, correction_start, correction_end, clip, mode_change, lateral_offset, violation
  json data = json::object();
};

struct StepTimings {
  double t_step_1 = 0.0;
  double t_steps_2_3 = 0.0;
  double t_steps_4_6 = 0.0;
  double t_steps_3p_5p = 0.0;  // corrections
  double t_steps_7_8 = 0.0;
  double total = 0.0;

  friend bool operator==(const StepTimings&, const StepTimings&) = default;
};

struct TrialSummary {
  PlacementScore score;
  Pose final_clip;
  double swept_volume_proxy = 0.0;  // clip path before the clip leaves the atrium (step 5)
  bool atrium_violation = false;
  double coupled_extension = 0.0;
  std::optional<double> residual_twist;  // distal roll change after the end of step 4
  std::optional<StepTimings> timings;
  DofVector max_joint_rate;
  double duration = 0.0;
};

struct TrialLog {
  LogHeader header;
  std::vector<TickRecord> ticks;
  std::vector<EventRecord> events;
  std::optional<TrialSummary> summary;
};

inline void to_json(json& j, const StepTimings& s) {
  j = json{{"t_step_1", s.t_step_1},
           {"t_steps_2_3", s.t_steps_2_3},
           {"t_steps_4_6", s.t_steps_4_6},
           {"t_steps_3p_5p", s.t_steps_3p_5p},
           {"t_steps_7_8", s.t_steps_7_8},
           {"total", s.total}};
}

inline void from_json(const json& j, StepTimings& s) {
  s.t_step_1 = j.at("t_step_1").get<double>();
  s.t_steps_2_3 = j.at("t_steps_2_3").get<double>();
  s.t_steps_4_6 = j.at("t_steps_4_6").get<double>();
  s.t_steps_3p_5p = j.at("t_steps_3p_5p").get<double>();
  s.t_steps_7_8 = j.at("t_steps_7_8").get<double>();
  s.total = j.at("total").get<double>();
}

inline void to_json(json& j, const TrialSummary& s) {
  j = json{{"score", s.score},
           {"final_clip", s.final_clip},
           {"swept_volume_proxy", s.swept_volume_proxy},
           {"atrium_violation", s.atrium_violation},
           {"coupled_extension", s.coupled_extension},
           {"residual_twist", s.residual_twist ? json(*s.residual_twist) : json(nullptr)},
           {"timings", s.timings ? json(*s.timings) : json(nullptr)},
           {"max_joint_rate", s.max_joint_rate},
           {"duration", s.duration}};
}

inline void from_json(const json& j, TrialSummary& s) {
  s.score = j.at("score").get<PlacementScore>();
  s.final_clip = j.at("final_clip").get<Pose>();
  s.swept_volume_proxy = j.at("swept_volume_proxy").get<double>();
  s.atrium_violation = j.at("atrium_violation").get<bool>();
  s.coupled_extension = j.at("coupled_extension").get<double>();
  s.residual_twist = j.at("residual_twist").is_null() ? std::nullopt : std::optional(j.at("residual_twist").get<double>());
  s.timings = j.at("timings").is_null() ? std::nullopt : std::optional(j.at("timings").get<StepTimings>());
  s.max_joint_rate = j.at("max_joint_rate").get<DofVector>();
  s.duration = j.at("duration").get<double>();
}

// ---- timing decomposition ----

namespace detail {
inline int timing_group(int step) {
  if (step == 1) return 0;
  if (step <= 3) return 1;
  if (step <= 6) return 2;
  return 4;
}
}  // namespace detail

// Partitions the marked timeline into the step groups {1}, {2,3}, {4..6}, corrections and
// {7,8}. Intervals must not overlap or leave gaps, and the timeline must open and close on
// a step marker.
inline StepTimings extract_timings(const std::vector<EventRecord>& events) {
  struct Open {
    bool correction = false;
    int step = 0;
    double t0 = 0.0;
  };
  Open open;
  bool is_open = false;
  std::optional<double> first_start, last_close;
  bool last_was_step = false;
  double groups[5] = {0, 0, 0, 0, 0};
  constexpr double kTol = 1e-9;

  for (const EventRecord& e : events) {
    const bool start = e.type == "step_start" || e.type == "correction_start";
    const bool end = e.type == "step_end" || e.type == "correction_end";
    if (!start && !end) continue;
    const bool corr = e.type.rfind("correction", 0) == 0;
    const int step = corr ? 0 : e.data.value("step", 0);
    if (!corr && (step < 1 || step > 8)) throw MalformedLogError("step marker without a valid step id at t=" + std::to_string(e.t));
    if (start) {
      if (is_open) throw MalformedLogError(std::string(e.type) + " at t=" + std::to_string(e.t) + " while another interval is open");
      if (!first_start) {
        if (corr) throw MalformedLogError("timeline starts with a correction");
        first_start = e.t;
      } else if (last_close && std::abs(e.t - *last_close) > kTol) {
        throw MalformedLogError("gap in the marked timeline before t=" + std::to_string(e.t));
      }
      open = Open{corr, step, e.t};
      is_open = true;
    } else {
      if (!is_open || open.correction != corr || open.step != step)
        throw MalformedLogError("unmatched " + e.type + " at t=" + std::to_string(e.t));
      if (e.t < open.t0) throw MalformedLogError("interval ends before it starts at t=" + std::to_string(e.t));
      groups[corr ? 3 : detail::timing_group(step)] += e.t - open.t0;
      last_close = e.t;
      last_was_step = !corr;
      is_open = false;
    }
  }
  if (is_open) throw MalformedLogError("interval opened at t=" + std::to_string(open.t0) + " is never closed");
  if (!first_start) throw MalformedLogError("log has no step markers");
  if (!last_was_step) throw MalformedLogError("timeline ends with a correction");

  StepTimings out;
  out.t_step_1 = groups[0];
  out.t_steps_2_3 = groups[1];
  out.t_steps_4_6 = groups[2];
  out.t_steps_3p_5p = groups[3];
  out.t_steps_7_8 = groups[4];
  out.total = *last_close - *first_start;
  return out;
}

inline StepTimings extract_timings(const TrialLog& log) { return extract_timings(log.events); }

// ---- summary ----

inline bool has_step_markers(const std::vector<EventRecord>& events) {
  return std::any_of(events.begin(), events.end(), [](const EventRecord& e) { return e.type == "step_start"; });
}

// Index of the last tick before the clip is sent through the valve (first step >= 5), or
// the final tick.
inline std::size_t atrial_phase_end(const TrialLog& log) {
  for (const EventRecord& e : log.events) {
    if (e.type == "step_start" && e.data.value("step", 0) >= 5) return static_cast<std::size_t>(e.i);
  }
  return log.ticks.empty() ? 0 : log.ticks.size() - 1;
}

inline TrialSummary compute_summary(const TrialLog& log) {
  if (log.ticks.empty()) throw MalformedLogError("log has no ticks");
  const SessionConfig cfg = config_from_json(log.header.config);
  const PlantModel& model = cfg.plant;
  const double dt = log.header.dt;

  TrialSummary s;
  const TickRecord& last = log.ticks.back();
  s.final_clip = clip_pose(last.state, model);
  s.score = score_placement(s.final_clip, log.header.target, cfg.phantom);
  s.coupled_extension = last.state.dist.coupled_extension;
  s.duration = last.t;

  const std::size_t end = atrial_phase_end(log);
  std::vector<Pose> path;
  path.reserve(end + 1);
  for (std::size_t k = 0; k <= end && k < log.ticks.size(); ++k) path.push_back(clip_pose(log.ticks[k].state, model));
  const CollisionReport col = check_atrium_collision(path, cfg.phantom);
  s.swept_volume_proxy = col.swept_volume_proxy;
  s.atrium_violation = col.violation;

  for (std::size_t k = 1; k < log.ticks.size(); ++k) {
    for (Dof d : kAllDofs) {
      const double r = std::abs(log.ticks[k].state.js[d] - log.ticks[k - 1].state.js[d]) / dt;
      s.max_joint_rate[d] = std::max(s.max_joint_rate[d], r);
    }
  }

  for (const EventRecord& e : log.events) {
    if (e.type == "step_end" && e.data.value("step", 0) == 4) {
      if (e.i < 0 || static_cast<std::size_t>(e.i) >= log.ticks.size()) throw MalformedLogError("event tick out of range");
      s.residual_twist = last.state.dist.distal_roll - log.ticks[static_cast<std::size_t>(e.i)].state.dist.distal_roll;
      break;
    }
  }
  if (has_step_markers(log.events)) s.timings = extract_timings(log.events);
  return s;
}

// ---- JSON lines ----

inline json header_to_json(const LogHeader& h) {
  return json{{"kind", "header"},
              {"format", kLogFormat},
              {"config_hash", h.config_hash},
              {"control", std::string(to_string(h.control))},
              {"target", std::string(to_string(h.target))},
              {"seed", h.seed},
              {"script", h.script},
              {"dt", h.dt},
              {"config", h.config}};
}

inline json tick_to_json(const TickRecord& t) {
  return json{{"kind", "tick"},
              {"i", t.i},
              {"t", t.t},
              {"step", t.step},
              {"correction", t.correction},
              {"mode", t.mode ? json(*t.mode) : json(nullptr)},
              {"cmd", t.cmd},
              {"js", t.state.js},
              {"dist", t.state.dist},
              {"clip", t.clip},
              {"ds_effective", t.ds_effective}};
}

inline json event_to_json(const EventRecord& e) {
  json j{{"kind", "event"}, {"i", e.i}, {"t", e.t}, {"type", e.type}};
  for (auto it = e.data.begin(); it != e.data.end(); ++it) j[it.key()] = it.value();
  return j;
}

inline void write_jsonl(std::ostream& out, const TrialLog& log) {
  out << header_to_json(log.header).dump() << '\n';
  std::size_t ev = 0;
  const auto flush_events = [&](long upto) {
    while (ev < log.events.size() && log.events[ev].i <= upto) out << event_to_json(log.events[ev++]).dump() << '\n';
  };
  for (const TickRecord& t : log.ticks) {
    flush_events(t.i - 1);
    out << tick_to_json(t).dump() << '\n';
  }
  flush_events(std::numeric_limits<long>::max());
  if (log.summary) {
    json s = *log.summary;
    s["kind"] = "summary";
    out << s.dump() << '\n';
  }
}

inline std::string to_jsonl(const TrialLog& log) {
  std::ostringstream out;
  write_jsonl(out, log);
  return out.str();
}

inline void save_log(const std::filesystem::path& path, const TrialLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_jsonl(log);  // buffered, one write at the end
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline TrialLog read_jsonl(std::istream& in) {
  TrialLog log;
  std::string line;
  long lineno = 0;
  bool have_header = false;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string kind = j.at("kind").get<std::string>();
      if (!have_header) {
        if (kind != "header") throw MalformedLogError("first line must be the header");
        if (j.at("format").get<std::string>() != kLogFormat) throw MalformedLogError("unsupported log format");
        LogHeader& h = log.header;
        h.config_hash = j.at("config_hash").get<std::string>();
        h.control = control_path_from_string(j.at("control").get<std::string>());
        h.target = segment_from_string(j.at("target").get<std::string>());
        h.seed = j.at("seed").get<std::uint64_t>();
        h.script = j.at("script").get<std::string>();
        h.dt = j.at("dt").get<double>();
        h.config = j.at("config");
        if (!(h.dt > 0.0)) throw MalformedLogError("dt must be positive");
        have_header = true;
        continue;
      }
      if (log.summary) throw MalformedLogError("records after the summary");
      if (kind == "tick") {
        TickRecord t;
        t.i = j.at("i").get<long>();
        t.t = j.at("t").get<double>();
        t.step = j.at("step").get<int>();
        t.correction = j.at("correction").get<bool>();
        if (!j.at("mode").is_null()) t.mode = j.at("mode").get<int>();
        t.cmd = j.at("cmd").get<VelocityCommand>();
        t.state.js = j.at("js").get<JointState>();
        t.state.dist = j.at("dist").get<DisturbanceState>();
        t.clip = j.at("clip").get<Pose>();
        t.ds_effective = j.at("ds_effective").get<double>();
        const long expect = static_cast<long>(log.ticks.size());
        if (t.i != expect) throw MalformedLogError("tick index " + std::to_string(t.i) + ", expected " + std::to_string(expect));
        if (!log.ticks.empty() && !(t.t > log.ticks.back().t)) throw MalformedLogError("tick times not increasing");
        if (std::abs(t.t - static_cast<double>(t.i) * log.header.dt) > 1e-9) throw MalformedLogError("tick time off the dt grid");
        log.ticks.push_back(std::move(t));
      } else if (kind == "event") {
        EventRecord e;
        e.i = j.at("i").get<long>();
        e.t = j.at("t").get<double>();
        e.type = j.at("type").get<std::string>();
        for (auto it = j.begin(); it != j.end(); ++it) {
          if (it.key() != "kind" && it.key() != "i" && it.key() != "t" && it.key() != "type") e.data[it.key()] = it.value();
        }
        if (e.i + 1 != static_cast<long>(log.ticks.size())) throw MalformedLogError("event out of order");
        log.events.push_back(std::move(e));
      } else if (kind == "summary") {
        log.summary = j.get<TrialSummary>();
      } else {
        throw MalformedLogError("unknown record kind '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw MalformedLogError("line " + std::to_string(lineno) + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw MalformedLogError("line " + std::to_string(lineno) + ": " + e.what());
  }
  if (!have_header) throw MalformedLogError("empty log");
  SessionConfig cfg;
  try {
    cfg = config_from_json(log.header.config);
  } catch (const ConfigError& e) {
    throw MalformedLogError(std::string("embedded config: ") + e.what());
  }
  if (config_hash(cfg) != log.header.config_hash) throw MalformedLogError("config hash does not match the embedded config");
  return log;
}

inline TrialLog load_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedLogError("cannot open " + path.string());
  return read_jsonl(in);
}

}  // namespace teer
