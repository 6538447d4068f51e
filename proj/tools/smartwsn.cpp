// smartwsn: simulate | monitor | replay | bench

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "smartwsn/bench.hpp"
#include "smartwsn/monitor.hpp"
#include "smartwsn/net.hpp"
#include "smartwsn/simulator.hpp"

namespace fs = std::filesystem;
using namespace smartwsn;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

struct WindowFlags {
  std::uint64_t tick_ms = WindowConfig{}.tick_ms;
  std::size_t short_len = WindowConfig{}.short_len;
  std::size_t avg_group = WindowConfig{}.avg_group;
  std::size_t long_len = WindowConfig{}.long_len;

  void add(CLI::App* app) {
    app->add_option("--tick-ms", tick_ms, "Sampling period in ms")->check(CLI::PositiveNumber);
    app->add_option("--short-len", short_len, "Instances per short window")->check(CLI::PositiveNumber);
    app->add_option("--avg-group", avg_group, "Readings per long-window average")->check(CLI::PositiveNumber);
    app->add_option("--long-len", long_len, "Averages per long window")->check(CLI::PositiveNumber);
  }

  WindowConfig config() const { return {tick_ms, short_len, avg_group, long_len}; }
};

struct DetectorFlags {
  WindowFlags windows;
  std::vector<std::string> thresholds;
  std::optional<double> threshold_all;
  std::string algorithm = "stump";
  std::size_t cooldown = 60;
  std::string data_dir;
  std::string out;
  bool load_models = false;
  bool no_long = false;

  void add(CLI::App* app) {
    windows.add(app);
    app->add_option("--threshold", thresholds, "Per-sensor threshold, sensor=percent (repeatable)")
        ->allow_extra_args(false)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    app->add_option("--threshold-all", threshold_all, "Same threshold for every sensor, in percent")
        ->check(CLI::PositiveNumber);
    app->add_option("--algorithm", algorithm, "linear, stump, table, knn or m5p");
    app->add_option("--cooldown", cooldown, "Instances to suppress repeats of an alert");
    app->add_option("--data-dir", data_dir, "Directory for window and model files");
    app->add_option("--out", out, "Alert log (JSON lines)");
    app->add_flag("--load-models", load_models, "Resume windows and models from --data-dir");
    app->add_flag("--no-long", no_long, "Ignore long-window models");
  }

  MonitorOptions options(RebuildMode mode) const {
    MonitorOptions opt;
    opt.windows = windows.config();
    if (threshold_all) opt.thresholds = ThresholdConfig::uniform(*threshold_all);
    for (const auto& t : thresholds) {
      const auto eq = t.find('=');
      const auto sensor = eq == std::string::npos ? std::nullopt : parse_sensor(t.substr(0, eq));
      if (!sensor) throw Error(ErrorCode::InvalidConfig, "bad --threshold '" + t + "' (expected sensor=percent)");
      try {
        opt.thresholds[*sensor] = std::stod(t.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, "bad --threshold '" + t + "' (expected sensor=percent)");
      }
    }
    const auto alg = parse_algorithm(algorithm);
    if (!alg) {
      throw Error(ErrorCode::UnknownAlgorithm,
                  "unknown algorithm '" + algorithm + "' (choices: " + std::string(kAlgorithmChoices) + ")");
    }
    opt.algorithm = *alg;
    opt.cooldown = cooldown;
    opt.rebuild = mode;
    if (!data_dir.empty()) opt.data_dir = fs::path(data_dir);
    opt.load_existing = load_models;
    opt.use_long_models = !no_long;
    opt.validate();
    return opt;
  }

  fs::path alert_log_path() const {
    if (!out.empty()) return out;
    return data_dir.empty() ? fs::path("alerts.jsonl") : fs::path(data_dir) / "alerts.jsonl";
  }
};

/// Sink printing each event and appending it to the log.
FaultMonitor::Sink printing_sink(AlertLog& log) {
  return [&log](const Event& ev) {
    std::cout << describe(ev) << '\n' << std::flush;
    log.write(ev);
  };
}

void print_stats(const MonitorStats& s) {
  std::cerr << "instances=" << s.instances << " unevaluated=" << s.unevaluated << " rejected=" << s.rejected
            << " alerts=" << s.alerts << " anomalies=" << s.anomalies << " suppressed=" << s.suppressed
            << " short_rebuilds=" << s.short_rebuilds << " long_rebuilds=" << s.long_rebuilds << '\n';
}

// ---- simulate -------------------------------------------------------------------

struct SimulateFlags {
  std::size_t nodes = 5;
  std::string listen = "127.0.0.1:9001";
  std::uint64_t tick_ms = 1000;
  std::uint64_t seconds_per_day = 86'400;
  std::uint64_t seed = 1;
  std::string fault_script;
  std::uint64_t max_ticks = 0;
  std::size_t wait_for_clients = 0;
  std::size_t queue_limit = 4096;
  std::string record;
  bool verbose = false;
};

Simulator make_simulator(const SimulateFlags& f) {
  FaultScript script;
  if (!f.fault_script.empty()) script = FaultScript::load(f.fault_script);
  SimClock clock;
  clock.tick_ms = f.tick_ms;
  clock.seconds_per_day = f.seconds_per_day;
  return Simulator(default_profiles(f.nodes), std::move(script), clock, f.seed);
}

int cmd_simulate(const SimulateFlags& f) {
  auto sim = make_simulator(f);
  if (!f.record.empty()) {
    if (f.max_ticks == 0) throw Error(ErrorCode::InvalidConfig, "--record needs --max-ticks");
    std::map<std::uint32_t, std::vector<EngineeringInstance>> traces;
    for (std::uint64_t t = 0; t < f.max_ticks; ++t) {
      for (const auto& frame : sim.frames(t)) {
        try {
          traces[frame.node_id].push_back(to_instance(frame));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::Unconvertible) throw;
        }
      }
    }
    fs::create_directories(f.record);
    for (const auto& [id, rows] : traces) {
      const auto path = window_file(f.record, id, "trace");
      write_window_csv(path, rows);
      std::cout << path.string() << " " << rows.size() << " rows\n";
    }
    return 0;
  }

  ServerOptions opt;
  opt.listen = Endpoint::parse(f.listen);
  opt.max_ticks = f.max_ticks;
  opt.wait_for_clients = f.wait_for_clients;
  opt.queue_limit = f.queue_limit;
  if (f.verbose) {
    opt.on_tick = [](std::uint64_t tick, std::size_t frames) {
      std::cerr << "tick " << tick << " frames " << frames << '\n';
    };
  }
  SimServer server(std::move(sim), opt);
  const auto port = server.start();
  std::cout << "listening on " << opt.listen.host << ":" << port << std::endl;
  std::thread watcher([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.run();
  g_stop = true;
  watcher.join();
  const auto s = server.stats();
  if (f.verbose) {
    std::cerr << "ticks=" << s.ticks << " frames=" << s.frames << " clients=" << s.clients_accepted
              << " dropped=" << s.clients_dropped << '\n';
  }
  return 0;
}

// ---- monitor --------------------------------------------------------------------

struct MonitorFlags {
  std::string connect = "127.0.0.1:9001";
  int retries = 5;
  int retry_delay_ms = 500;
  DetectorFlags detector;
  bool verbose = false;
};

int cmd_monitor(const MonitorFlags& f) {
  const auto opt = f.detector.options(RebuildMode::Background);
  ClientOptions copt;
  copt.server = Endpoint::parse(f.connect);
  copt.connect_attempts = f.retries;
  copt.retry_delay_ms = f.retry_delay_ms;
  AlertLog log(f.detector.alert_log_path());
  FaultMonitor mon(opt);
  mon.set_sink(printing_sink(log));
  int status = 0;
  try {
    const auto stats = run_client(copt, [&](const EngineeringInstance& inst) { mon.ingest(inst); }, &g_stop,
                                  [&](const FrameError& e) {
                                    if (f.verbose) {
                                      std::cerr << "frame error " << to_string(e.kind) << " at byte "
                                                << e.offset << '\n';
                                    }
                                  });
    if (f.verbose) {
      std::cerr << "frames=" << stats.frames << " decode_errors=" << stats.decode_errors
                << " unconvertible=" << stats.unconvertible << (stats.interrupted ? " (interrupted)" : "") << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "smartwsn monitor: " << e.what() << '\n';
    status = 1;
  }
  mon.finish();
  if (f.verbose) print_stats(mon.stats());
  return status;
}

// ---- replay ---------------------------------------------------------------------

struct ReplayFlags {
  std::vector<std::string> files;
  std::optional<std::uint32_t> node;
  DetectorFlags detector;
  bool verbose = false;
};

std::uint32_t node_from_filename(const fs::path& p) {
  static const std::regex pattern(R"(node_(\d+)_)");
  std::smatch m;
  const auto name = p.filename().string();
  if (std::regex_search(name, m, pattern)) return static_cast<std::uint32_t>(std::stoul(m[1]));
  return 1;
}

int cmd_replay(const ReplayFlags& f) {
  const auto opt = f.detector.options(RebuildMode::Inline);
  std::vector<std::pair<std::uint32_t, std::vector<EngineeringInstance>>> inputs;
  for (const auto& file : f.files) {
    const auto id = f.node.value_or(node_from_filename(file));
    inputs.emplace_back(id, read_window_csv(file, id));
  }
  AlertLog log(f.detector.alert_log_path());
  FaultMonitor mon(opt);
  mon.set_sink(printing_sink(log));
  for (const auto& [id, rows] : inputs) {
    for (const auto& inst : rows) mon.ingest(inst);
  }
  mon.finish();
  if (f.verbose) print_stats(mon.stats());
  return 0;
}

// ---- bench ----------------------------------------------------------------------

struct BenchFlags {
  std::vector<std::string> data;
  std::string algorithms = "all";
  std::string target = "all";
  double holdout = 0.3;
  std::string report;
  std::string histogram;
  EnergyModel energy;
};

int cmd_bench(const BenchFlags& f) {
  const auto algorithms = parse_algorithm_list(f.algorithms);
  std::vector<Sensor> targets;
  if (f.target == "all") {
    targets.assign(kAllSensors.begin(), kAllSensors.end());
  } else if (auto s = parse_sensor(f.target)) {
    targets.push_back(*s);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown --target '" + f.target + "'");
  }
  BenchOptions opt;
  opt.holdout = f.holdout;
  opt.energy = f.energy;
  opt.validate();

  std::vector<Dataset> tasks;
  for (const auto& file : f.data) {
    const auto rows = read_window_csv(file, node_from_filename(file));
    auto more = bench_tasks(rows, targets);
    tasks.insert(tasks.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  }
  const auto report = run_bench(tasks, algorithms, opt);

  auto emit = [](const std::string& path, auto&& writer) {
    if (path.empty() || path == "-") {
      writer(std::cout);
      return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
    writer(out);
  };
  emit(f.report, [&](std::ostream& o) { write_report_csv(o, report); });
  if (!f.histogram.empty()) emit(f.histogram, [&](std::ostream& o) { write_histogram_csv(o, report); });
  return 0;
}

// ---- config file ----------------------------------------------------------------

/// Flat key=value lines become "--key=value" tokens for the chosen subcommand.
std::vector<std::string> config_tokens(const fs::path& path, const CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::InvalidConfig, path.string() + ": line " + std::to_string(n) + ": " + why);
    };
    if (eq == std::string::npos) fail("expected key=value");
    auto key = line.substr(0, eq);
    auto value = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    if (key.empty() || key == "config" || sub.get_option_no_throw("--" + key) == nullptr) {
      fail("unknown key '" + key + "' for " + sub.get_name());
    }
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wireless sensor network fault detection"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config;
  app.add_option("--config", config, "Flat key=value file; command-line flags win")->check(CLI::ExistingFile);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Serve synthetic mote frames over TCP");
  simulate->add_option("--nodes", sim.nodes, "Number of simulated nodes")->check(CLI::Range(1, 255));
  simulate->add_option("--listen", sim.listen, "host:port to listen on (port 0 picks one)");
  simulate->add_option("--tick-ms", sim.tick_ms, "Milliseconds between ticks")->check(CLI::PositiveNumber);
  simulate->add_option("--seconds-per-day", sim.seconds_per_day, "Real seconds per simulated day")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Noise seed");
  simulate->add_option("--fault-script", sim.fault_script, "Fault script file")->check(CLI::ExistingFile);
  simulate->add_option("--max-ticks", sim.max_ticks, "Stop after this many ticks (0: run until interrupted)");
  simulate->add_option("--wait-for-clients", sim.wait_for_clients, "Hold the first tick until N clients joined");
  simulate->add_option("--queue-limit", sim.queue_limit, "Ticks buffered per client before it is dropped")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--record", sim.record, "Write per-node trace CSVs to this directory instead of serving");
  simulate->add_flag("-v,--verbose", sim.verbose, "Print per-tick frame counts");

  MonitorFlags mon;
  auto* monitor = app.add_subcommand("monitor", "Connect to a base station and detect faults");
  monitor->add_option("--connect", mon.connect, "Base station host:port");
  monitor->add_option("--retries", mon.retries, "Connection attempts before giving up")->check(CLI::PositiveNumber);
  monitor->add_option("--retry-delay-ms", mon.retry_delay_ms, "Delay between attempts");
  mon.detector.add(monitor);
  monitor->add_flag("-v,--verbose", mon.verbose, "Print counters on exit");

  ReplayFlags rep;
  auto* replay = app.add_subcommand("replay", "Run recorded window CSV files through the detector");
  replay->add_option("files", rep.files, "Window CSV files")->required()->check(CLI::ExistingFile);
  replay->add_option("--node", rep.node, "Node id (default: from file name)");
  rep.detector.add(replay);
  replay->add_flag("-v,--verbose", rep.verbose, "Print counters on exit");

  BenchFlags ben;
  auto* bench = app.add_subcommand("bench", "Compare prediction algorithms on recorded data");
  bench->add_option("--data", ben.data, "Window CSV files")->required()->check(CLI::ExistingFile);
  bench->add_option("--algorithms", ben.algorithms, "Comma-separated list or 'all'");
  bench->add_option("--target", ben.target, "Target sensor, or 'all' to pool every sensor");
  bench->add_option("--holdout", ben.holdout, "Trailing fraction used for testing");
  bench->add_option("--report", ben.report, "Report CSV (default: stdout)");
  bench->add_option("--histogram", ben.histogram, "Error histogram CSV");
  bench->add_option("--cpu-watts", ben.energy.cpu_power_watts, "CPU power during prediction");
  bench->add_option("--radio-watts", ben.energy.radio_power_watts, "Radio transmit power");
  bench->add_option("--radio-bps", ben.energy.radio_rate_bps, "Radio rate in bits per second");
  bench->add_option("--message-bits", ben.energy.message_bits, "Bits per transmitted message");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    // Config values go first so explicit flags take precedence.
    std::optional<std::string> config_path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        config_path = args[++i];
      } else if (args[i].starts_with("--config=")) {
        config_path = args[i].substr(9);
      } else {
        rest.push_back(args[i]);
      }
    }
    if (config_path) {
      const auto sub_it = std::find_if(rest.begin(), rest.end(), [&](const std::string& a) {
        return a == "simulate" || a == "monitor" || a == "replay" || a == "bench";
      });
      if (sub_it == rest.end()) throw CLI::RequiredError("a subcommand");
      const auto tokens = config_tokens(*config_path, *app.get_subcommand(*sub_it));
      rest.insert(sub_it + 1, tokens.begin(), tokens.end());
    }
    std::vector<std::string> reversed(rest.rbegin(), rest.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "smartwsn: " << e.what() << '\n';
    return 2;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  try {
    if (*simulate) return cmd_simulate(sim);
    if (*monitor) return cmd_monitor(mon);
    if (*replay) return cmd_replay(rep);
    if (*bench) return cmd_bench(ben);
  } catch (const Error& e) {
    std::cerr << "smartwsn: " << e.what() << '\n';
    return e.code() == ErrorCode::UnknownAlgorithm || e.code() == ErrorCode::InvalidConfig ? 2 : 1;
  }
  return 0;
}
