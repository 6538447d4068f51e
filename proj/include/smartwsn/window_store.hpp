#pragma once

// Per-node short and long sliding windows.
//
// Every appended instance enters the short window and a pending group; each
// time the group reaches avg_group instances its average enters the long
// window. Windows are count-based. On disk each node has three CSV files
// (short, long, pending) with the header
//   timestamp_ms,light_pct,temp_c,accel_x_g,accel_y_g,voltage_v
// and values printed with 6 decimals. Files are replaced atomically.

#include <array>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smartwsn/conversion.hpp"
#include "smartwsn/dataset.hpp"
#include "smartwsn/error.hpp"
#include "smartwsn/regressors/numeric.hpp"
#include "smartwsn/sensors.hpp"

namespace smartwsn {

struct WindowConfig {
  std::uint64_t tick_ms = 1000;
  std::size_t short_len = 3600;
  std::size_t avg_group = 60;
  std::size_t long_len = 1440;

  void validate() const {
    if (tick_ms == 0 || short_len == 0 || avg_group == 0 || long_len == 0) {
      throw Error(ErrorCode::InvalidConfig, "window dimensions must all be >= 1");
    }
  }
};

enum class WindowKind { Short, Long };

constexpr std::string_view window_name(WindowKind w) noexcept {
  return w == WindowKind::Short ? "short" : "long";
}

struct AppendOutcome {
  bool long_entry_added = false;
  bool short_cycle_complete = false;  // short window is full
  bool long_cycle_complete = false;   // long window became full with this append
};

/// Arithmetic mean of every sensor; timestamp of the last member.
inline EngineeringInstance minute_average(std::span<const EngineeringInstance> group) {
  if (group.empty()) throw Error(ErrorCode::EmptyGroup, "cannot average an empty group");
  EngineeringInstance out;
  out.node_id = group.front().node_id;
  out.timestamp_ms = group.back().timestamp_ms;
  for (std::size_t s = 0; s < kSensorCount; ++s) {
    out.values[s] = numeric::stable_mean(group, [s](const EngineeringInstance& i) { return i.values[s]; });
  }
  return out;
}

inline constexpr std::uint64_t kMsPerDay = 86'400'000;

inline double seconds_since_midnight(std::uint64_t timestamp_ms) noexcept {
  return static_cast<double>(timestamp_ms % kMsPerDay) / 1000.0;
}

inline constexpr std::size_t kFeatureArity = kSensorCount;  // time of day + four other sensors

/// Model inputs for predicting `target`: time of day, then the other four
/// sensors in wire order.
inline std::array<double, kFeatureArity> features_for(const EngineeringInstance& inst, Sensor target) {
  std::array<double, kFeatureArity> x{};
  x[0] = seconds_since_midnight(inst.timestamp_ms);
  std::size_t j = 1;
  for (Sensor s : kAllSensors) {
    if (s != target) x[j++] = inst[s];
  }
  return x;
}

inline std::vector<std::string> feature_names_for(Sensor target) {
  std::vector<std::string> names = {"time_of_day_s"};
  for (Sensor s : kAllSensors) {
    if (s != target) names.emplace_back(sensor_name(s));
  }
  return names;
}

/// Training rows for `target` from a complete window, in window order.
inline Dataset snapshot_training_set(std::span<const EngineeringInstance> buffer, Sensor target,
                                     std::size_t required_len) {
  if (buffer.size() < required_len) {
    throw Error(ErrorCode::IncompleteWindow, "window holds " + std::to_string(buffer.size()) + " of " +
                                                 std::to_string(required_len) + " instances");
  }
  Dataset d(feature_names_for(target));
  for (const auto& inst : buffer) {
    const auto x = features_for(inst, target);
    d.add_row(x, inst[target]);
  }
  return d;
}

inline constexpr std::string_view kWindowCsvHeader = "timestamp_ms,light_pct,temp_c,accel_x_g,accel_y_g,voltage_v";

inline std::string format_window_row(const EngineeringInstance& inst) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.6f,%.6f,%.6f,%.6f,%.6f", inst.timestamp_ms,
                inst.values[0], inst.values[1], inst.values[2], inst.values[3], inst.values[4]);
  return buf;
}

inline void write_window_csv(const std::filesystem::path& path, std::span<const EngineeringInstance> rows) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    out << kWindowCsvHeader << '\n';
    for (const auto& r : rows) out << format_window_row(r) << '\n';
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

/// Parses a window CSV. Every row must have six numeric fields and
/// timestamps must strictly increase; failures name the 1-based line.
inline std::vector<EngineeringInstance> read_window_csv(const std::filesystem::path& path, std::uint32_t node_id) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  auto fail = [&](std::size_t line, const std::string& what) -> Error {
    return Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line) + ": " + what);
  };
  std::vector<EngineeringInstance> rows;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw fail(1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kWindowCsvHeader) throw fail(1, "unexpected header");
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 1 + kSensorCount) {
      throw fail(line_no, "expected 6 fields, found " + std::to_string(fields.size()));
    }
    EngineeringInstance inst;
    inst.node_id = node_id;
    try {
      std::size_t used = 0;
      inst.timestamp_ms = std::stoull(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("timestamp");
      for (std::size_t s = 0; s < kSensorCount; ++s) {
        inst.values[s] = std::stod(fields[s + 1], &used);
        if (used != fields[s + 1].size()) throw std::invalid_argument("value");
      }
    } catch (const std::exception&) {
      throw fail(line_no, "non-numeric field");
    }
    if (!rows.empty() && inst.timestamp_ms <= rows.back().timestamp_ms) {
      throw fail(line_no, "timestamp not strictly increasing");
    }
    rows.push_back(inst);
  }
  return rows;
}

inline std::filesystem::path window_file(const std::filesystem::path& dir, std::uint32_t node_id, std::string_view which) {
  return dir / ("node_" + std::to_string(node_id) + "_" + std::string(which) + ".csv");
}

/// One node's windows. Single writer; snapshots are copies that may be handed
/// to another thread.
class NodeStore {
 public:
  NodeStore(std::uint32_t node_id, WindowConfig cfg) : node_id_(node_id), cfg_(cfg) { cfg_.validate(); }

  std::uint32_t node_id() const noexcept { return node_id_; }
  const WindowConfig& config() const noexcept { return cfg_; }
  const std::deque<EngineeringInstance>& short_buffer() const noexcept { return short_; }
  const std::deque<EngineeringInstance>& long_buffer() const noexcept { return long_; }
  const std::vector<EngineeringInstance>& pending_group() const noexcept { return pending_; }
  std::optional<std::uint64_t> last_timestamp() const noexcept { return last_ts_; }

  bool full(WindowKind w) const noexcept {
    return w == WindowKind::Short ? short_.size() >= cfg_.short_len : long_.size() >= cfg_.long_len;
  }

  /// Full windows slide: the oldest entry drops out when a new one arrives.
  AppendOutcome append(EngineeringInstance inst) {
    if (last_ts_ && inst.timestamp_ms <= *last_ts_) {
      throw Error(ErrorCode::NonMonotonicTimestamp, "node " + std::to_string(node_id_) + ": timestamp " +
                                                        std::to_string(inst.timestamp_ms) + " after " +
                                                        std::to_string(*last_ts_));
    }
    inst.node_id = node_id_;
    last_ts_ = inst.timestamp_ms;
    AppendOutcome out;
    short_.push_back(inst);
    if (short_.size() > cfg_.short_len) short_.pop_front();
    pending_.push_back(inst);
    if (pending_.size() >= cfg_.avg_group) {
      long_.push_back(minute_average(pending_));
      if (long_.size() > cfg_.long_len) long_.pop_front();
      pending_.clear();
      out.long_entry_added = true;
      out.long_cycle_complete = long_.size() == cfg_.long_len;
    }
    out.short_cycle_complete = short_.size() == cfg_.short_len;
    return out;
  }

  std::vector<EngineeringInstance> snapshot(WindowKind w) const {
    const auto& buf = w == WindowKind::Short ? short_ : long_;
    return {buf.begin(), buf.end()};
  }

  Dataset training_set(WindowKind w, Sensor target) const {
    const auto rows = snapshot(w);
    return snapshot_training_set(rows, target, w == WindowKind::Short ? cfg_.short_len : cfg_.long_len);
  }

  /// Clears a full window; the on-disk file is replaced at the next persist.
  void rollover(WindowKind w) {
    if (!full(w)) {
      throw Error(ErrorCode::IncompleteWindow, std::string(window_name(w)) + " window of node " +
                                                   std::to_string(node_id_) + " is not full");
    }
    (w == WindowKind::Short ? short_ : long_).clear();
  }

  void persist(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    const std::vector<EngineeringInstance> s(short_.begin(), short_.end());
    const std::vector<EngineeringInstance> l(long_.begin(), long_.end());
    write_window_csv(window_file(dir, node_id_, "short"), s);
    write_window_csv(window_file(dir, node_id_, "long"), l);
    write_window_csv(window_file(dir, node_id_, "pending"), pending_);
  }

  /// Missing files load as empty windows.
  static NodeStore load(const std::filesystem::path& dir, std::uint32_t node_id, WindowConfig cfg) {
    NodeStore store(node_id, cfg);
    auto read = [&](std::string_view which, std::size_t limit) {
      const auto path = window_file(dir, node_id, which);
      if (!std::filesystem::exists(path)) return std::vector<EngineeringInstance>{};
      auto rows = read_window_csv(path, node_id);
      if (rows.size() > limit) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + std::to_string(rows.size()) +
                                               " rows exceed window length " + std::to_string(limit));
      }
      return rows;
    };
    const auto s = read("short", cfg.short_len);
    const auto l = read("long", cfg.long_len);
    store.pending_ = read("pending", cfg.avg_group - 1);
    store.short_.assign(s.begin(), s.end());
    store.long_.assign(l.begin(), l.end());
    for (const std::vector<EngineeringInstance>* buf : {&s, &l, &std::as_const(store.pending_)}) {
      if (!buf->empty() && (!store.last_ts_ || buf->back().timestamp_ms > *store.last_ts_)) {
        store.last_ts_ = buf->back().timestamp_ms;
      }
    }
    return store;
  }

  static bool has_files(const std::filesystem::path& dir, std::uint32_t node_id) {
    return std::filesystem::exists(window_file(dir, node_id, "short")) ||
           std::filesystem::exists(window_file(dir, node_id, "long"));
  }

 private:
  std::uint32_t node_id_;
  WindowConfig cfg_;
  std::deque<EngineeringInstance> short_;
  std::deque<EngineeringInstance> long_;
  std::vector<EngineeringInstance> pending_;
  std::optional<std::uint64_t> last_ts_;
};

}  // namespace smartwsn
