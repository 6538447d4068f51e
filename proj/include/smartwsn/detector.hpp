#pragma once

// Two-stage fault decision for one incoming instance.
//
//   1. Predict every monitored sensor with the node's short-window models and
//      compare against the observed value (deviation percent vs threshold).
//   2. No breach: Ok. Two or more breaches: NodeAnomalyEvent.
//   3. Exactly one breach: without long-window models the sensor is reported
//      at once (ShortOnlyNoLongModels). With long models the sensor is
//      re-checked against its long model; a persisting breach is reported
//      (LongConfirmed), otherwise the instance is Ok.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "smartwsn/conversion.hpp"
#include "smartwsn/error.hpp"
#include "smartwsn/regressors/predictor.hpp"
#include "smartwsn/sensors.hpp"
#include "smartwsn/window_store.hpp"

namespace smartwsn {

struct ThresholdConfig {
  // Percent, indexed by Sensor: light, temperature, accel_x, accel_y, voltage.
  SensorValues percent = {10.0, 5.0, 10.0, 10.0, 5.0};
  double epsilon = 1e-6;

  double operator[](Sensor s) const noexcept { return percent[index_of(s)]; }
  double& operator[](Sensor s) noexcept { return percent[index_of(s)]; }

  static ThresholdConfig uniform(double pct) {
    ThresholdConfig cfg;
    cfg.percent.fill(pct);
    return cfg;
  }

  void validate() const {
    for (Sensor s : kAllSensors) {
      if (!((*this)[s] > 0.0)) {
        throw Error(ErrorCode::InvalidConfig, "threshold for " + std::string(sensor_name(s)) + " must be > 0");
      }
    }
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
  }
};

/// 100 * |predicted - actual| / max(|actual|, epsilon)
inline double deviation_percent(double predicted, double actual, double epsilon) noexcept {
  return 100.0 * std::abs(predicted - actual) / std::max(std::abs(actual), epsilon);
}

/// Immutable set of per-sensor predictors for one node and window.
struct ModelSet {
  std::uint32_t node_id = 0;
  WindowKind window = WindowKind::Short;
  Algorithm algorithm = Algorithm::DecisionStump;
  std::uint64_t built_at_ms = 0;
  std::array<std::optional<Predictor>, kSensorCount> predictors;

  bool has(Sensor s) const noexcept { return predictors[index_of(s)].has_value(); }

  double predict(Sensor s, const EngineeringInstance& inst) const {
    const auto& p = predictors[index_of(s)];
    if (!p) throw Error(ErrorCode::InvalidConfig, "no model for " + std::string(sensor_name(s)));
    const auto x = features_for(inst, s);
    return p->predict(x);
  }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto& p : predictors) n += p.has_value();
    return n;
  }
};

using ModelSetPtr = std::shared_ptr<const ModelSet>;

inline std::filesystem::path model_file(const std::filesystem::path& dir, std::uint32_t node_id, Sensor s,
                                        WindowKind w) {
  return dir / ("node_" + std::to_string(node_id) + "_" + std::string(sensor_file_tag(s)) + "_" +
                std::string(window_name(w)) + ".model");
}

inline void save_model_set(const ModelSet& set, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  for (Sensor s : kAllSensors) {
    if (const auto& p = set.predictors[index_of(s)]) save_predictor(*p, model_file(dir, set.node_id, s, set.window));
  }
}

/// Loads whichever of `sensors` have model files; nullopt when none do.
inline std::optional<ModelSet> load_model_set(const std::filesystem::path& dir, std::uint32_t node_id, WindowKind w,
                                              std::span<const Sensor> sensors) {
  ModelSet set;
  set.node_id = node_id;
  set.window = w;
  bool any = false;
  for (Sensor s : sensors) {
    const auto path = model_file(dir, node_id, s, w);
    if (!std::filesystem::exists(path)) continue;
    set.predictors[index_of(s)] = load_predictor(path);
    set.algorithm = set.predictors[index_of(s)]->algorithm();
    any = true;
  }
  if (!any) return std::nullopt;
  return set;
}

/// Fits one predictor per sensor from a complete window snapshot.
inline ModelSet build_model_set(std::uint32_t node_id, WindowKind w, std::span<const EngineeringInstance> window,
                                std::size_t required_len, Algorithm algorithm, std::span<const Sensor> sensors,
                                const RegressorOptions& opt = {}) {
  if (window.size() < required_len) {
    throw Error(ErrorCode::IncompleteWindow, std::string(window_name(w)) + " window of node " +
                                                 std::to_string(node_id) + " holds " +
                                                 std::to_string(window.size()) + " of " +
                                                 std::to_string(required_len));
  }
  ModelSet set;
  set.node_id = node_id;
  set.window = w;
  set.algorithm = algorithm;
  set.built_at_ms = window.empty() ? 0 : window.back().timestamp_ms;
  for (Sensor s : sensors) {
    const auto data = snapshot_training_set(window, s, required_len);
    set.predictors[index_of(s)] = fit_predictor(algorithm, data, opt);
  }
  return set;
}

inline ModelSet rebuild_models(const NodeStore& store, WindowKind w, Algorithm algorithm,
                               std::span<const Sensor> sensors, const RegressorOptions& opt = {}) {
  const auto window = store.snapshot(w);
  const auto len = w == WindowKind::Short ? store.config().short_len : store.config().long_len;
  return build_model_set(store.node_id(), w, window, len, algorithm, sensors, opt);
}

enum class AlertStage { ShortOnlyNoLongModels, LongConfirmed };

constexpr std::string_view stage_name(AlertStage s) noexcept {
  return s == AlertStage::ShortOnlyNoLongModels ? "ShortOnlyNoLongModels" : "LongConfirmed";
}

struct Alert {
  std::uint32_t node_id = 0;
  Sensor sensor = Sensor::Temperature;
  double observed = 0.0;
  double predicted = 0.0;  // from the model that decided the alert
  double deviation_pct = 0.0;
  AlertStage stage = AlertStage::ShortOnlyNoLongModels;
  std::uint64_t timestamp_ms = 0;

  friend bool operator==(const Alert&, const Alert&) = default;
};

struct NodeAnomalyEvent {
  std::uint32_t node_id = 0;
  std::vector<Sensor> sensors;  // two or more, wire order
  std::uint64_t timestamp_ms = 0;

  friend bool operator==(const NodeAnomalyEvent&, const NodeAnomalyEvent&) = default;
};

struct Ok {
  friend bool operator==(const Ok&, const Ok&) = default;
};

using Verdict = std::variant<Ok, Alert, NodeAnomalyEvent>;

struct Breach {
  Sensor sensor;
  double predicted;
  double deviation_pct;
};

/// Sensors whose short-model deviation exceeds their threshold.
inline std::vector<Breach> short_stage_breaches(const EngineeringInstance& inst, const ModelSet& models,
                                                const ThresholdConfig& cfg) {
  std::vector<Breach> out;
  for (Sensor s : kAllSensors) {
    if (!models.has(s)) continue;
    const double predicted = models.predict(s, inst);
    const double dev = deviation_percent(predicted, inst[s], cfg.epsilon);
    if (dev > cfg[s]) out.push_back({s, predicted, dev});
  }
  return out;
}

inline Verdict evaluate_instance(const EngineeringInstance& inst, const ModelSet& short_models,
                                 const ModelSet* long_models, const ThresholdConfig& cfg) {
  const auto breaches = short_stage_breaches(inst, short_models, cfg);
  if (breaches.empty()) return Ok{};
  if (breaches.size() >= 2) {
    NodeAnomalyEvent ev;
    ev.node_id = inst.node_id;
    ev.timestamp_ms = inst.timestamp_ms;
    for (const auto& b : breaches) ev.sensors.push_back(b.sensor);
    return ev;
  }
  const Breach& b = breaches.front();
  Alert alert;
  alert.node_id = inst.node_id;
  alert.sensor = b.sensor;
  alert.observed = inst[b.sensor];
  alert.timestamp_ms = inst.timestamp_ms;
  if (long_models == nullptr || !long_models->has(b.sensor)) {
    alert.predicted = b.predicted;
    alert.deviation_pct = b.deviation_pct;
    alert.stage = AlertStage::ShortOnlyNoLongModels;
    return alert;
  }
  const double predicted = long_models->predict(b.sensor, inst);
  const double dev = deviation_percent(predicted, inst[b.sensor], cfg.epsilon);
  if (!(dev > cfg[b.sensor])) return Ok{};
  alert.predicted = predicted;
  alert.deviation_pct = dev;
  alert.stage = AlertStage::LongConfirmed;
  return alert;
}

// ---- node-level aggregation -----------------------------------------------------

struct Healthy {
  friend bool operator==(const Healthy&, const Healthy&) = default;
};
struct SensorFault {
  Sensor sensor;
  friend bool operator==(const SensorFault&, const SensorFault&) = default;
};
struct NodeSuspect {
  friend bool operator==(const NodeSuspect&, const NodeSuspect&) = default;
};

using NodeHealth = std::variant<Healthy, SensorFault, NodeSuspect>;

/// Classifies a node from its alert history inside (now - horizon, now].
/// Fewer than `min_alerts` alerts on a single sensor is still Healthy.
inline NodeHealth node_health(std::span<const Verdict> history, std::uint64_t now_ms, std::uint64_t horizon_ms,
                              std::size_t min_alerts) {
  const std::uint64_t since = now_ms > horizon_ms ? now_ms - horizon_ms : 0;
  std::optional<Sensor> only;
  bool multiple = false;
  std::size_t count = 0;
  for (const auto& v : history) {
    if (const auto* ev = std::get_if<NodeAnomalyEvent>(&v)) {
      if (ev->timestamp_ms > since && ev->timestamp_ms <= now_ms) return NodeSuspect{};
    } else if (const auto* a = std::get_if<Alert>(&v)) {
      if (a->timestamp_ms <= since || a->timestamp_ms > now_ms) continue;
      if (only && *only != a->sensor) multiple = true;
      only = a->sensor;
      ++count;
    }
  }
  if (multiple) return NodeSuspect{};
  if (only && count >= min_alerts) return SensorFault{*only};
  return Healthy{};
}

}  // namespace smartwsn
