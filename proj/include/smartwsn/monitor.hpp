#pragma once

// Per-node detection pipeline shared by the live monitor and replay.
//
// Each instance is first evaluated against the node's active models, then
// appended to its windows. A completed short or long cycle persists the
// windows, rebuilds that window's models and rolls the window over.
//
// Background rebuilds run on std::async against a snapshot. A finished set is
// swapped in before the node's next instance is evaluated; evaluation never
// waits for a set that is still being fitted.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "smartwsn/detector.hpp"
#include "smartwsn/error.hpp"
#include "smartwsn/window_store.hpp"

namespace smartwsn {

enum class RebuildMode { Inline, Background };

struct MonitorOptions {
  WindowConfig windows;
  ThresholdConfig thresholds;
  Algorithm algorithm = Algorithm::DecisionStump;
  RegressorOptions regressor;
  std::vector<Sensor> sensors{kAllSensors.begin(), kAllSensors.end()};
  std::optional<std::filesystem::path> data_dir;  // windows and model files
  std::size_t cooldown = 60;                      // instances per (node, sensor)
  RebuildMode rebuild = RebuildMode::Inline;
  bool load_existing = false;  // resume windows and models from data_dir
  bool use_long_models = true;

  void validate() const {
    windows.validate();
    thresholds.validate();
    if (sensors.empty()) throw Error(ErrorCode::InvalidConfig, "no sensors to monitor");
    if (load_existing && !data_dir) throw Error(ErrorCode::InvalidConfig, "loading requires a data directory");
  }
};

using Event = std::variant<Alert, NodeAnomalyEvent>;

inline nlohmann::json to_json(const Event& ev) {
  if (const auto* a = std::get_if<Alert>(&ev)) {
    return {{"type", "alert"},
            {"node", a->node_id},
            {"sensor", sensor_name(a->sensor)},
            {"observed", a->observed},
            {"predicted", a->predicted},
            {"deviation_pct", a->deviation_pct},
            {"stage", stage_name(a->stage)},
            {"timestamp_ms", a->timestamp_ms}};
  }
  const auto& n = std::get<NodeAnomalyEvent>(ev);
  nlohmann::json sensors = nlohmann::json::array();
  for (Sensor s : n.sensors) sensors.push_back(sensor_name(s));
  return {{"type", "node_anomaly"}, {"node", n.node_id}, {"sensors", sensors}, {"timestamp_ms", n.timestamp_ms}};
}

inline std::string describe(const Event& ev) {
  char buf[256];
  if (const auto* a = std::get_if<Alert>(&ev)) {
    std::snprintf(buf, sizeof buf, "ALERT node=%u sensor=%s stage=%s deviation=%.3f%% observed=%.6g predicted=%.6g ts=%llu",
                  a->node_id, std::string(sensor_name(a->sensor)).c_str(), std::string(stage_name(a->stage)).c_str(),
                  a->deviation_pct, a->observed, a->predicted, static_cast<unsigned long long>(a->timestamp_ms));
    return buf;
  }
  const auto& n = std::get<NodeAnomalyEvent>(ev);
  std::string names;
  for (Sensor s : n.sensors) names += (names.empty() ? "" : ",") + std::string(sensor_name(s));
  std::snprintf(buf, sizeof buf, "NODE_ANOMALY node=%u sensors=%s ts=%llu", n.node_id, names.c_str(),
                static_cast<unsigned long long>(n.timestamp_ms));
  return buf;
}

/// One JSON object per line.
class AlertLog {
 public:
  explicit AlertLog(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::trunc);
    if (!out_) throw Error(ErrorCode::IoError, "cannot open alert log " + path.string());
  }

  void write(const Event& ev) {
    std::lock_guard lock(mu_);
    out_ << to_json(ev).dump() << '\n';
    out_.flush();
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex mu_;
};

inline std::vector<Event> read_alert_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open alert log " + path.string());
  std::vector<Event> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("type") == "alert") {
        Alert a;
        a.node_id = j.at("node").get<std::uint32_t>();
        a.sensor = parse_sensor(j.at("sensor").get<std::string>()).value();
        a.observed = j.at("observed").get<double>();
        a.predicted = j.at("predicted").get<double>();
        a.deviation_pct = j.at("deviation_pct").get<double>();
        a.stage = j.at("stage") == "LongConfirmed" ? AlertStage::LongConfirmed : AlertStage::ShortOnlyNoLongModels;
        a.timestamp_ms = j.at("timestamp_ms").get<std::uint64_t>();
        out.emplace_back(a);
      } else {
        NodeAnomalyEvent e;
        e.node_id = j.at("node").get<std::uint32_t>();
        for (const auto& s : j.at("sensors")) e.sensors.push_back(parse_sensor(s.get<std::string>()).value());
        e.timestamp_ms = j.at("timestamp_ms").get<std::uint64_t>();
        out.emplace_back(e);
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

/// Active model set for one (node, window); readers always see a whole set.
class ModelSlot {
 public:
  ModelSetPtr get() const {
    std::lock_guard lock(mu_);
    return current_;
  }
  void set(ModelSetPtr next) {
    std::lock_guard lock(mu_);
    current_ = std::move(next);
  }

 private:
  mutable std::mutex mu_;
  ModelSetPtr current_;
};

struct MonitorStats {
  std::uint64_t instances = 0;
  std::uint64_t rejected = 0;     // non-monotonic timestamps
  std::uint64_t unevaluated = 0;  // no short models yet
  std::uint64_t alerts = 0;
  std::uint64_t anomalies = 0;
  std::uint64_t suppressed = 0;  // within cooldown
  std::uint64_t short_rebuilds = 0;
  std::uint64_t long_rebuilds = 0;
};

class FaultMonitor {
 public:
  using Sink = std::function<void(const Event&)>;

  explicit FaultMonitor(MonitorOptions opt) : opt_(std::move(opt)) { opt_.validate(); }

  FaultMonitor(const FaultMonitor&) = delete;
  FaultMonitor& operator=(const FaultMonitor&) = delete;

  ~FaultMonitor() {
    try {
      wait_for_rebuilds();
    } catch (...) {
    }
  }

  const MonitorOptions& options() const noexcept { return opt_; }
  const MonitorStats& stats() const noexcept { return stats_; }

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  /// Non-empty events only; suppressed alerts are counted, not returned.
  std::vector<Event> ingest(const EngineeringInstance& inst) {
    Node& node = node_for(inst.node_id);
    collect(node, false);
    ++stats_.instances;
    if (node.store.last_timestamp() && inst.timestamp_ms <= *node.store.last_timestamp()) {
      ++stats_.rejected;
      return {};
    }

    std::vector<Event> events;
    const auto short_models = node.short_slot.get();
    if (!short_models) {
      ++stats_.unevaluated;
    } else {
      const auto long_models = opt_.use_long_models ? node.long_slot.get() : nullptr;
      auto verdict = evaluate_instance(inst, *short_models, long_models.get(), opt_.thresholds);
      if (auto* a = std::get_if<Alert>(&verdict)) {
        if (allow(node, index_of(a->sensor))) {
          ++stats_.alerts;
          events.emplace_back(std::move(*a));
        }
      } else if (auto* ev = std::get_if<NodeAnomalyEvent>(&verdict)) {
        if (allow(node, kSensorCount)) {
          ++stats_.anomalies;
          events.emplace_back(std::move(*ev));
        }
      }
    }
    ++node.index;

    const auto outcome = node.store.append(inst);
    if (outcome.short_cycle_complete || outcome.long_cycle_complete) {
      if (opt_.data_dir) node.store.persist(*opt_.data_dir);
      if (outcome.short_cycle_complete) complete_cycle(node, WindowKind::Short);
      if (outcome.long_cycle_complete) complete_cycle(node, WindowKind::Long);
    }

    for (const auto& ev : events) {
      remember(node, ev);
      if (sink_) sink_(ev);
    }
    return events;
  }

  void wait_for_rebuilds() {
    for (auto& [id, node] : nodes_) collect(*node, true);
  }

  /// Waits for pending rebuilds and writes every node's windows.
  void finish() {
    wait_for_rebuilds();
    if (!opt_.data_dir) return;
    for (const auto& [id, node] : nodes_) node->store.persist(*opt_.data_dir);
  }

  ModelSetPtr models(std::uint32_t node_id, WindowKind w) const {
    const auto it = nodes_.find(node_id);
    if (it == nodes_.end()) return nullptr;
    return (w == WindowKind::Short ? it->second->short_slot : it->second->long_slot).get();
  }

  void install_models(std::uint32_t node_id, ModelSet set) {
    Node& node = node_for(node_id);
    set.node_id = node_id;
    const auto w = set.window;
    (w == WindowKind::Short ? node.short_slot : node.long_slot).set(std::make_shared<const ModelSet>(std::move(set)));
  }

  const NodeStore* store(std::uint32_t node_id) const {
    const auto it = nodes_.find(node_id);
    return it == nodes_.end() ? nullptr : &it->second->store;
  }

  std::vector<std::uint32_t> node_ids() const {
    std::vector<std::uint32_t> out;
    for (const auto& [id, node] : nodes_) out.push_back(id);
    return out;
  }

  NodeHealth health(std::uint32_t node_id, std::uint64_t now_ms, std::uint64_t horizon_ms,
                    std::size_t min_alerts) const {
    const auto it = nodes_.find(node_id);
    if (it == nodes_.end()) return Healthy{};
    const std::vector<Verdict> history(it->second->history.begin(), it->second->history.end());
    return node_health(history, now_ms, horizon_ms, min_alerts);
  }

 private:
  static constexpr std::size_t kHistoryLimit = 4096;

  struct Node {
    explicit Node(NodeStore s) : store(std::move(s)) {}
    NodeStore store;
    ModelSlot short_slot;
    ModelSlot long_slot;
    std::future<ModelSetPtr> short_job;
    std::future<ModelSetPtr> long_job;
    std::uint64_t index = 0;
    std::array<std::optional<std::uint64_t>, kSensorCount + 1> last_alert{};  // last slot: node events
    std::deque<Verdict> history;
  };

  Node& node_for(std::uint32_t id) {
    auto it = nodes_.find(id);
    if (it != nodes_.end()) return *it->second;
    std::unique_ptr<Node> node;
    if (opt_.load_existing) {
      node = std::make_unique<Node>(NodeStore::load(*opt_.data_dir, id, opt_.windows));
      // A full window on disk was already modelled when its cycle completed.
      for (auto w : {WindowKind::Short, WindowKind::Long}) {
        if (node->store.full(w)) node->store.rollover(w);
      }
      for (auto w : {WindowKind::Short, WindowKind::Long}) {
        if (auto set = load_model_set(*opt_.data_dir, id, w, opt_.sensors)) {
          (w == WindowKind::Short ? node->short_slot : node->long_slot)
              .set(std::make_shared<const ModelSet>(std::move(*set)));
        }
      }
    } else {
      node = std::make_unique<Node>(NodeStore(id, opt_.windows));
    }
    return *nodes_.emplace(id, std::move(node)).first->second;
  }

  bool allow(Node& node, std::size_t slot) {
    auto& last = node.last_alert[slot];
    if (last && node.index - *last < opt_.cooldown) {
      ++stats_.suppressed;
      return false;
    }
    last = node.index;
    return true;
  }

  void remember(Node& node, const Event& ev) {
    std::visit([&](const auto& e) { node.history.emplace_back(e); }, ev);
    if (node.history.size() > kHistoryLimit) node.history.pop_front();
  }

  void complete_cycle(Node& node, WindowKind w) {
    const std::size_t len = w == WindowKind::Short ? opt_.windows.short_len : opt_.windows.long_len;
    auto snapshot = node.store.snapshot(w);
    node.store.rollover(w);
    ++(w == WindowKind::Short ? stats_.short_rebuilds : stats_.long_rebuilds);

    ModelSlot& slot = w == WindowKind::Short ? node.short_slot : node.long_slot;
    auto job = [this, id = node.store.node_id(), w, len, snapshot = std::move(snapshot)] {
      auto set = build_model_set(id, w, snapshot, len, opt_.algorithm, opt_.sensors, opt_.regressor);
      if (opt_.data_dir) save_model_set(set, *opt_.data_dir);
      return std::make_shared<const ModelSet>(std::move(set));
    };
    if (opt_.rebuild == RebuildMode::Inline) {
      slot.set(job());
      return;
    }
    auto& pending = w == WindowKind::Short ? node.short_job : node.long_job;
    if (pending.valid()) slot.set(pending.get());
    pending = std::async(std::launch::async, std::move(job));
  }

  /// Publishes finished background rebuilds; with `block` waits for running ones.
  static void collect(Node& node, bool block) {
    for (auto [job, slot] : {std::pair{&node.short_job, &node.short_slot}, std::pair{&node.long_job, &node.long_slot}}) {
      if (!job->valid()) continue;
      if (block || job->wait_for(std::chrono::seconds(0)) == std::future_status::ready) slot->set(job->get());
    }
  }

  MonitorOptions opt_;
  MonitorStats stats_;
  Sink sink_;
  std::map<std::uint32_t, std::unique_ptr<Node>> nodes_;
};

}  // namespace smartwsn
