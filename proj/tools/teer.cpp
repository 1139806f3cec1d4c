// teer: headless front end. Runs scripted trials, replays and analyses logs, serves live
// sessions, regenerates the shipped scenarios and recalibrates the disturbance constants.

#include <glob.h>
#include <signal.h>

#include <CLI11.hpp>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>

#include "teer/metrics.hpp"
#include "teer/scenarios.hpp"
#include "teer/server.hpp"

namespace fs = std::filesystem;
using namespace teer;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

SessionConfig config_or_default(const std::string& path) { return path.empty() ? SessionConfig{} : load_config(path); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0)
    for (std::size_t k = 0; k < g.gl_pathc; ++k) out.emplace_back(g.gl_pathv[k]);
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw std::runtime_error("glob failed for '" + pattern + "'");
  std::sort(out.begin(), out.end());
  return out;
}

std::string session_id() {
  std::random_device rd;
  std::ostringstream o;
  o << std::hex << std::setfill('0') << std::setw(8) << rd() << std::setw(8) << rd();
  return o.str();
}

void print_groups(const MetricsReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(2);
  for (const GroupRow& g : r.groups) {
    out << to_string(g.control) << ' ' << to_string(g.target) << ": " << g.trials << " trials";
    if (g.mean_timings) out << ", mean total " << g.mean_timings->total << " s";
    if (g.placement_spread) out << ", spread " << *g.placement_spread << " mm";
    out << ", extension " << g.coupled_extension.mean << " mm";
    if (g.residual_twist.n) out << ", twist " << g.residual_twist.mean << " deg";
    out << ", swept volume " << g.swept_volume_proxy.mean << " mm^3";
    if (g.atrium_violations) out << ", " << g.atrium_violations << " atrium violations";
    out << '\n';
  }
  for (const Comparison& c : r.comparisons)
    if (c.time_ratio) out << to_string(c.target) << " robotic/manual time ratio " << std::setprecision(3) << *c.time_ratio << '\n';
  out << std::defaultfloat;
}

// Blocks SIGINT/SIGTERM in every thread started after this, so the main thread can
// sigwait for them.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

void wait_for_signal_or(const sigset_t& set, double seconds) {
  if (seconds > 0) {
    timespec ts{static_cast<time_t>(seconds), static_cast<long>((seconds - std::floor(seconds)) * 1e9)};
    sigtimedwait(&set, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&set, &sig);
  }
}

// ---- subcommands ----

struct RunArgs {
  std::string scenario, control, target, out, config;
  int trials = 0;
};

int cmd_run(const RunArgs& a) {
  const SessionConfig cfg = config_or_default(a.config);
  const Scenario sc = load_scenario(a.scenario);
  std::vector<ControlPath> paths;
  if (a.control.empty())
    paths = {ControlPath::manual, ControlPath::robotic};
  else
    paths = {control_path_from_string(a.control)};
  const std::optional<Segment> target = a.target.empty() ? std::nullopt : std::optional(segment_from_string(a.target));

  std::vector<const CommandScript*> chosen;
  for (ControlPath p : paths) {
    std::vector<const CommandScript*> fam;
    for (const CommandScript& s : sc.family(p))
      if (!target || s.target == *target) fam.push_back(&s);
    if (fam.empty()) {
      throw UsageError("scenario '" + sc.name + "' has no " + std::string(to_string(p)) + " scripts" +
                       (target ? " for " + std::string(to_string(*target)) : std::string()));
    }
    if (a.trials > 0) {
      if (static_cast<std::size_t>(a.trials) > fam.size())
        throw UsageError("asked for " + std::to_string(a.trials) + " trials, scenario has " + std::to_string(fam.size()) + " " +
                         std::string(to_string(p)) + " scripts");
      fam.resize(static_cast<std::size_t>(a.trials));
    }
    chosen.insert(chosen.end(), fam.begin(), fam.end());
  }

  fs::create_directories(a.out);
  std::vector<TrialLog> logs;
  for (const CommandScript* s : chosen) {
    TrialLog log = run_trial(*s, cfg);
    const fs::path path = fs::path(a.out) / (s->name + ".jsonl");
    save_log(path, log);
    std::cout << "wrote " << path.string() << '\n';
    logs.push_back(std::move(log));
  }
  const MetricsReport r = compute_metrics(logs);
  write_text(fs::path(a.out) / "metrics.json", pretty(metrics_to_json(r)));
  write_text(fs::path(a.out) / "metrics.csv", metrics_to_csv(r));
  print_groups(r, std::cout);
  return 0;
}

struct ReplayArgs {
  std::string log;
  double speed = 1.0;
  bool serve = false;
  bool no_wait = false;
  std::string address = "127.0.0.1";
  int port = 8765;
  bool quiet = false;
};

int cmd_replay(const ReplayArgs& a) {
  const TrialLog log = load_log(a.log);
  if (a.serve) {
    if (!(a.speed > 0)) throw UsageError("--serve needs a positive --speed");
    ServerOptions o;
    o.address = a.address;
    o.port = static_cast<unsigned short>(a.port);
    o.stop_when_finished = true;
    o.start_on_first_client = !a.no_wait;
    const sigset_t sigs = block_stop_signals();
    Server srv(std::make_unique<ReplaySource>(log, a.speed, session_id()), o);
    std::cout << "replaying " << a.log << " on ws://" << a.address << ':' << srv.port() << "/observer" << std::endl;
    std::thread watcher([&] {
      wait_for_signal_or(sigs, 0);
      srv.stop();
    });
    srv.run();
    pthread_kill(watcher.native_handle(), SIGTERM);
    watcher.join();
    std::cout << "replay finished\n";
    return 0;
  }
  const TrialSummary again = replay(log, a.speed, [&](const ReplayFrame& f) {
    if (a.quiet) return;
    for (const EventRecord* e : f.events) std::cout << std::fixed << std::setprecision(2) << e->t << ' ' << e->type << ' ' << e->data.dump() << '\n';
  });
  std::cout << json(again).dump(2) << '\n';
  if (!log.summary) throw MalformedLogError("log has no summary to check against");
  if (json(again) != json(*log.summary)) {
    std::cerr << "replayed summary differs from the logged one\n";
    return 3;
  }
  if (const auto k = first_divergence(log)) {
    std::cerr << "re-simulation diverges from the log at tick " << *k << '\n';
    return 3;
  }
  std::cout << "summary and trajectory reproduce\n";
  return 0;
}

int cmd_metrics(const std::string& pattern, const std::string& format, const std::string& out) {
  const auto paths = expand_glob(pattern);
  if (paths.empty()) throw UsageError("no logs match '" + pattern + "'");
  std::vector<TrialLog> logs;
  for (const auto& p : paths) logs.push_back(load_log(p));
  const MetricsReport r = compute_metrics(logs);
  const std::string text = format == "json" ? pretty(metrics_to_json(r)) : metrics_to_csv(r);
  if (out.empty())
    std::cout << text;
  else
    write_text(out, text);
  return 0;
}

int cmd_serve(const std::string& config, const std::string& address, int port, double duration) {
  const SessionConfig cfg = config_or_default(config);
  const sigset_t sigs = block_stop_signals();
  ServerOptions o;
  o.address = address;
  o.port = static_cast<unsigned short>(port);
  const std::string id = session_id();
  Server srv(std::make_unique<SessionCore>(cfg, id), o);
  srv.start();
  std::cout << "session " << id << " on ws://" << address << ':' << srv.port() << " (/driver, /observer)" << std::endl;
  wait_for_signal_or(sigs, duration);
  srv.stop();
  srv.join();
  std::cout << "stopped\n";
  return 0;
}

// Family means the calibrated model must land in.
struct Threshold {
  const char* what;
  double value, lo, hi;
};

int cmd_calibrate(const std::string& config, const std::string& scenarios_dir, const std::string& write) {
  SessionConfig cfg = config_or_default(config);
  const Scenario s2 = load_scenario(fs::path(scenarios_dir) / "step2.json");
  const Scenario s456 = load_scenario(fs::path(scenarios_dir) / "steps456.json");
  if (s2.manual.empty() || s456.manual.empty()) throw std::runtime_error("scenarios lack canonical manual scripts");
  const scenarios::Calibration c = scenarios::calibrate(cfg, s2.manual.front(), s456.manual.front());
  cfg.plant.friction.k_couple = c.k_couple;
  cfg.plant.friction.release_gain = c.release_gain;
  std::cout << std::setprecision(10) << "k_couple      " << c.k_couple << "  (IS sweep " << c.step2_sweep << " deg)\n"
            << "release_gain  " << c.release_gain << '\n';

  auto mean = [&](const std::vector<CommandScript>& fam, auto field) {
    double sum = 0;
    for (const CommandScript& s : fam) sum += field(*run_trial(s, cfg).summary);
    return sum / static_cast<double>(fam.size());
  };
  const auto ext = [](const TrialSummary& s) { return s.coupled_extension; };
  const auto twist = [](const TrialSummary& s) { return s.residual_twist.value_or(NAN); };
  const Threshold checks[] = {
      {"manual step-2 coupled extension (mm)", mean(s2.manual, ext), 4.0, 8.0},
      {"robotic step-2 coupled extension (mm)", mean(s2.robotic, ext), 0.0, 0.0},
      {"manual steps 4-6 residual twist (deg)", mean(s456.manual, twist), 24.0, 32.0},
      {"robotic steps 4-6 residual twist (deg)", mean(s456.robotic, twist), 0.0, 13.0},
  };
  bool ok = true;
  for (const Threshold& t : checks) {
    const bool pass = t.value >= t.lo && t.value <= t.hi;
    ok &= pass;
    std::cout << (pass ? "ok   " : "FAIL ") << t.what << " = " << std::setprecision(4) << t.value << "  [" << t.lo << ", "
              << t.hi << "]\n";
  }
  if (!write.empty()) {
    write_text(write, pretty(config_to_json(cfg)));
    std::cout << "wrote " << write << '\n';
  }
  if (!ok) {
    std::cerr << "calibrated model misses the acceptance thresholds\n";
    return 4;
  }
  return 0;
}

int cmd_generate(const std::string& config, const std::string& out_dir, const std::string& config_out, std::uint64_t seed) {
  const SessionConfig cfg = config_or_default(config);
  for (const Scenario& sc : scenarios::generate_all(cfg, seed)) {
    const fs::path p = fs::path(out_dir) / (sc.name + ".json");
    write_text(p, pretty(scenario_to_json(sc)));
    std::cout << "wrote " << p.string() << " (" << sc.manual.size() << " manual, " << sc.robotic.size() << " robotic)\n";
  }
  if (!config_out.empty()) {
    write_text(config_out, pretty(config_to_json(cfg)));
    std::cout << "wrote " << config_out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"teer: robotic TEER delivery simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kWireVersion));

  RunArgs run;
  auto* c_run = app.add_subcommand("run", "run a scenario's scripted trials and write logs plus metrics");
  c_run->add_option("--scenario", run.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
  c_run->add_option("--control", run.control, "manual or robotic (default: both)")->check(CLI::IsMember({"manual", "robotic"}));
  c_run->add_option("--target", run.target, "a1p1, a2p2 or a3p3 (default: any)")->check(CLI::IsMember({"a1p1", "a2p2", "a3p3"}));
  c_run->add_option("--trials", run.trials, "first N scripts of each family (default: all)")->check(CLI::PositiveNumber);
  c_run->add_option("--out", run.out, "output directory")->required();
  c_run->add_option("--config", run.config, "simulator config JSON")->check(CLI::ExistingFile);

  ReplayArgs rp;
  auto* c_replay = app.add_subcommand("replay", "replay a trial log, or stream it to websocket observers");
  c_replay->add_option("--log", rp.log, "trial log (.jsonl)")->required()->check(CLI::ExistingFile);
  c_replay->add_option("--speed", rp.speed, "playback speed; 0 replays instantly (default 1)")->check(CLI::NonNegativeNumber);
  c_replay->add_flag("--serve", rp.serve, "stream to ws://address:port/observer");
  c_replay->add_flag("--no-wait", rp.no_wait, "with --serve: start without waiting for an observer");
  c_replay->add_option("--address", rp.address, "bind address for --serve");
  c_replay->add_option("--port", rp.port, "port for --serve (0 picks one)")->check(CLI::Range(0, 65535));
  c_replay->add_flag("--quiet", rp.quiet, "only print the summary");

  std::string m_logs, m_format = "csv", m_out;
  auto* c_metrics = app.add_subcommand("metrics", "tables over a set of trial logs");
  c_metrics->add_option("--logs", m_logs, "glob of trial logs, e.g. 'out/*.jsonl'")->required();
  c_metrics->add_option("--format", m_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  c_metrics->add_option("--out", m_out, "write to a file instead of stdout");

  std::string s_config, s_address = "127.0.0.1";
  int s_port = 8765;
  double s_duration = 0;
  auto* c_serve = app.add_subcommand("serve", "live session for one driver and any number of observers");
  c_serve->add_option("--config", s_config, "simulator config JSON")->check(CLI::ExistingFile);
  c_serve->add_option("--port", s_port, "port (0 picks one)")->check(CLI::Range(0, 65535));
  c_serve->add_option("--address", s_address, "bind address");
  c_serve->add_option("--duration", s_duration, "stop after this many seconds (default: until SIGINT)")->check(CLI::NonNegativeNumber);

  std::string k_config, k_scenarios = "scenarios", k_write;
  auto* c_cal = app.add_subcommand("calibrate", "refit the disturbance constants against the canonical manual scripts");
  c_cal->add_option("--config", k_config, "starting config JSON")->check(CLI::ExistingFile);
  c_cal->add_option("--scenarios", k_scenarios, "directory holding step2.json and steps456.json")->check(CLI::ExistingDirectory);
  c_cal->add_option("--write", k_write, "write the calibrated config here");

  std::string g_config, g_out = "scenarios", g_config_out;
  std::uint64_t g_seed = 2024;
  auto* c_gen = app.add_subcommand("generate", "re-author the shipped scenario files");
  c_gen->add_option("--config", g_config, "simulator config JSON")->check(CLI::ExistingFile);
  c_gen->add_option("--out", g_out, "output directory");
  c_gen->add_option("--seed", g_seed, "variation seed");
  c_gen->add_option("--write-config", g_config_out, "also write the config used");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_run) return cmd_run(run);
    if (*c_replay) return cmd_replay(rp);
    if (*c_metrics) return cmd_metrics(m_logs, m_format, m_out);
    if (*c_serve) return cmd_serve(s_config, s_address, s_port, s_duration);
    if (*c_cal) return cmd_calibrate(k_config, k_scenarios, k_write);
    if (*c_gen) return cmd_generate(g_config, g_out, g_config_out, g_seed);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
