#pragma once

// Cross-trial tables: one row per trial, one row per (control path, target) group, and the
// robotic/manual comparison per target.

#include <algorithm>
#include <map>
#include <tuple>
#include <numeric>
#include <sstream>

#include "teer/trials.hpp"

namespace teer {

struct TrialRow {
  std::string script;
  ControlPath control = ControlPath::robotic;
  Segment target = Segment::a2p2;
  std::optional<StepTimings> timings;
  double along_line_position = 0.0;
  double off_line_error = 0.0;
  double axis_tilt = 0.0;
  double roll_error = 0.0;
  std::optional<double> residual_twist;
  double coupled_extension = 0.0;
  double swept_volume_proxy = 0.0;
  bool atrium_violation = false;
};

inline TrialRow trial_row(const TrialLog& log) {
  if (!log.summary) throw MalformedLogError("log has no summary");
  const TrialSummary& s = *log.summary;
  return {log.header.script,      log.header.control,        log.header.target,   s.timings,
          s.score.along_line_position, s.score.off_line_error, s.score.axis_tilt, s.score.roll_error,
          s.residual_twist,       s.coupled_extension,       s.swept_volume_proxy, s.atrium_violation};
}

struct Stat {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for n < 2
};

inline Stat stat(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct GroupRow {
  ControlPath control = ControlPath::robotic;
  Segment target = Segment::a2p2;
  std::size_t trials = 0;
  std::optional<StepTimings> mean_timings;  // over trials that have step markers
  std::optional<double> placement_spread;   // needs two or more trials
  Stat residual_twist;
  Stat coupled_extension;
  Stat swept_volume_proxy;
  std::size_t atrium_violations = 0;
};

struct Comparison {
  Segment target = Segment::a2p2;
  std::optional<double> time_ratio;  // mean robotic total / mean manual total
};

struct MetricsReport {
  std::vector<TrialRow> trials;
  std::vector<GroupRow> groups;
  std::vector<Comparison> comparisons;
};

inline MetricsReport compute_metrics(const std::vector<TrialLog>& logs) {
  if (logs.empty()) throw std::invalid_argument("no trial logs");
  MetricsReport r;
  // Canonical order, so the report does not depend on how the logs were listed.
  std::vector<const TrialLog*> sorted;
  for (const TrialLog& l : logs) sorted.push_back(&l);
  std::sort(sorted.begin(), sorted.end(), [](const TrialLog* a, const TrialLog* b) {
    return std::tuple(static_cast<int>(a->header.control), static_cast<int>(a->header.target), a->header.script) <
           std::tuple(static_cast<int>(b->header.control), static_cast<int>(b->header.target), b->header.script);
  });
  std::map<std::pair<int, int>, std::vector<const TrialLog*>> by_group;
  for (const TrialLog* l : sorted) {
    r.trials.push_back(trial_row(*l));
    by_group[{static_cast<int>(l->header.control), static_cast<int>(l->header.target)}].push_back(l);
  }
  for (const auto& [key, group] : by_group) {
    GroupRow g;
    g.control = static_cast<ControlPath>(key.first);
    g.target = static_cast<Segment>(key.second);
    g.trials = group.size();
    std::vector<double> twist, ext, vol;
    std::vector<StepTimings> timed;
    for (const TrialLog* l : group) {
      const TrialSummary& s = *l->summary;
      if (s.residual_twist) twist.push_back(*s.residual_twist);
      ext.push_back(s.coupled_extension);
      vol.push_back(s.swept_volume_proxy);
      if (s.atrium_violation) ++g.atrium_violations;
      if (s.timings) timed.push_back(*s.timings);
    }
    g.residual_twist = stat(twist);
    g.coupled_extension = stat(ext);
    g.swept_volume_proxy = stat(vol);
    if (group.size() >= 2) g.placement_spread = placement_spread(group, g.target);
    if (!timed.empty()) {
      StepTimings m;
      for (const StepTimings& t : timed) {
        m.t_step_1 += t.t_step_1;
        m.t_steps_2_3 += t.t_steps_2_3;
        m.t_steps_4_6 += t.t_steps_4_6;
        m.t_steps_3p_5p += t.t_steps_3p_5p;
        m.t_steps_7_8 += t.t_steps_7_8;
        m.total += t.total;
      }
      const double n = static_cast<double>(timed.size());
      for (double* f : {&m.t_step_1, &m.t_steps_2_3, &m.t_steps_4_6, &m.t_steps_3p_5p, &m.t_steps_7_8, &m.total}) *f /= n;
      g.mean_timings = m;
    }
    r.groups.push_back(g);
  }
  for (Segment seg : {Segment::a1p1, Segment::a2p2, Segment::a3p3}) {
    const GroupRow* man = nullptr;
    const GroupRow* rob = nullptr;
    for (const GroupRow& g : r.groups) {
      if (g.target != seg) continue;
      (g.control == ControlPath::manual ? man : rob) = &g;
    }
    if (!man || !rob) continue;
    Comparison c{seg, std::nullopt};
    if (man->mean_timings && rob->mean_timings && man->mean_timings->total > 0)
      c.time_ratio = rob->mean_timings->total / man->mean_timings->total;
    r.comparisons.push_back(c);
  }
  return r;
}

namespace detail {
inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
inline json stat_json(const Stat& s) { return {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}}; }
inline std::string csv_num(double v) {
  std::ostringstream o;
  o.precision(10);
  o << v;
  return o.str();
}
inline std::string csv_opt(const std::optional<double>& v) { return v ? csv_num(*v) : ""; }
}  // namespace detail

inline json metrics_to_json(const MetricsReport& r) {
  json trials = json::array(), groups = json::array(), comps = json::array();
  for (const TrialRow& t : r.trials) {
    trials.push_back({{"script", t.script},
                      {"control", std::string(to_string(t.control))},
                      {"target", std::string(to_string(t.target))},
                      {"timings", t.timings ? json(*t.timings) : json(nullptr)},
                      {"along_line_position", t.along_line_position},
                      {"off_line_error", t.off_line_error},
                      {"axis_tilt", t.axis_tilt},
                      {"roll_error", t.roll_error},
                      {"residual_twist", detail::opt(t.residual_twist)},
                      {"coupled_extension", t.coupled_extension},
                      {"swept_volume_proxy", t.swept_volume_proxy},
                      {"atrium_violation", t.atrium_violation}});
  }
  for (const GroupRow& g : r.groups) {
    groups.push_back({{"control", std::string(to_string(g.control))},
                      {"target", std::string(to_string(g.target))},
                      {"trials", g.trials},
                      {"mean_timings", g.mean_timings ? json(*g.mean_timings) : json(nullptr)},
                      {"placement_spread", detail::opt(g.placement_spread)},
                      {"residual_twist", detail::stat_json(g.residual_twist)},
                      {"coupled_extension", detail::stat_json(g.coupled_extension)},
                      {"swept_volume_proxy", detail::stat_json(g.swept_volume_proxy)},
                      {"atrium_violations", g.atrium_violations}});
  }
  for (const Comparison& c : r.comparisons)
    comps.push_back({{"target", std::string(to_string(c.target))}, {"time_ratio", detail::opt(c.time_ratio)}});
  return {{"trials", trials}, {"groups", groups}, {"comparisons", comps}};
}

// Three CSV tables separated by a blank line.
inline std::string metrics_to_csv(const MetricsReport& r) {
  using detail::csv_num;
  using detail::csv_opt;
  std::ostringstream o;
  o << "script,control,target,t_step_1,t_steps_2_3,t_steps_4_6,t_steps_3p_5p,t_steps_7_8,total,"
       "along_line_position,off_line_error,axis_tilt,roll_error,residual_twist,coupled_extension,"
       "swept_volume_proxy,atrium_violation\n";
  auto timing_cells = [&](const std::optional<StepTimings>& t) {
    if (!t) return std::string(",,,,,");
    return csv_num(t->t_step_1) + "," + csv_num(t->t_steps_2_3) + "," + csv_num(t->t_steps_4_6) + "," +
           csv_num(t->t_steps_3p_5p) + "," + csv_num(t->t_steps_7_8) + "," + csv_num(t->total);
  };
  for (const TrialRow& t : r.trials) {
    o << t.script << ',' << to_string(t.control) << ',' << to_string(t.target) << ',' << timing_cells(t.timings) << ','
      << csv_num(t.along_line_position) << ',' << csv_num(t.off_line_error) << ',' << csv_num(t.axis_tilt) << ','
      << csv_num(t.roll_error) << ',' << csv_opt(t.residual_twist) << ',' << csv_num(t.coupled_extension) << ','
      << csv_num(t.swept_volume_proxy) << ',' << (t.atrium_violation ? 1 : 0) << '\n';
  }
  o << "\ncontrol,target,trials,t_step_1,t_steps_2_3,t_steps_4_6,t_steps_3p_5p,t_steps_7_8,total,placement_spread,"
       "twist_mean,twist_sd,extension_mean,extension_sd,volume_mean,atrium_violations\n";
  for (const GroupRow& g : r.groups) {
    o << to_string(g.control) << ',' << to_string(g.target) << ',' << g.trials << ',' << timing_cells(g.mean_timings)
      << ',' << csv_opt(g.placement_spread) << ',' << (g.residual_twist.n ? csv_num(g.residual_twist.mean) : "") << ','
      << (g.residual_twist.n ? csv_num(g.residual_twist.sd) : "") << ',' << csv_num(g.coupled_extension.mean) << ','
      << csv_num(g.coupled_extension.sd) << ',' << csv_num(g.swept_volume_proxy.mean) << ',' << g.atrium_violations
      << '\n';
  }
  o << "\ntarget,time_ratio\n";
  for (const Comparison& c : r.comparisons) o << to_string(c.target) << ',' << csv_opt(c.time_ratio) << '\n';
  return o.str();
}

}  // namespace teer
