#pragma once

// Synthetic base station: diurnal sensor traces per node plus scripted faults.
//
// Fault script, one event per line, '#' starts a comment:
//
//   <start_tick> <node_id> <sensor|-> <kind> [argument]
//
//   120 3 temperature stuck 200     temperature ADC fixed at 200
//   100 1 light drift 1.5           +1.5 counts per tick since start
//   50  2 -     dropout 3           no frames from node 2 for ticks 50..52
//   400 4 -     death               no frames from node 4 from tick 400

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "smartwsn/error.hpp"
#include "smartwsn/sensors.hpp"
#include "smartwsn/wire.hpp"

namespace smartwsn {

using AdcValues = std::array<std::uint16_t, kSensorCount>;

/// All values in ADC counts, indexed by Sensor.
struct NodeProfile {
  std::uint8_t node_id = 1;
  SensorValues baseline = {600.0, 512.0, 676.0, 635.0, 400.0};
  SensorValues amplitude = {60.0, 12.0, 0.0, 0.0, 0.0};  // light and temperature only
  SensorValues noise_sd = {2.0, 1.0, 1.0, 1.0, 1.0};
  double voltage_decay = 0.0;  // counts per tick, subtracted from the voltage baseline

  void validate() const {
    for (double sd : noise_sd) {
      if (!(sd >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sd must be >= 0");
    }
  }
};

inline NodeProfile default_profile(std::uint8_t node_id) {
  NodeProfile p;
  p.node_id = node_id;
  return p;
}

inline std::vector<NodeProfile> default_profiles(std::size_t count) {
  if (count == 0 || count > 255) throw Error(ErrorCode::InvalidConfig, "node count must be in 1..255");
  std::vector<NodeProfile> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(default_profile(static_cast<std::uint8_t>(i)));
  return out;
}

struct SimClock {
  std::uint64_t tick_ms = 1000;
  std::uint64_t seconds_per_day = 86'400;
  std::uint64_t start_ms = 1'700'006'400'000;  // 2023-11-15 00:00:00 UTC

  void validate() const {
    if (tick_ms == 0) throw Error(ErrorCode::InvalidConfig, "tick_ms must be >= 1");
    if (seconds_per_day == 0) throw Error(ErrorCode::InvalidConfig, "seconds per day must be >= 1");
  }

  /// Simulated wall time: one real second advances 86400 / seconds_per_day.
  std::uint64_t timestamp_ms(std::uint64_t tick) const noexcept {
    return start_ms + tick * tick_ms * 86'400 / seconds_per_day;
  }

  /// Fraction of the simulated day in [0, 1); 0 at midnight, 0.5 at noon.
  double day_fraction(std::uint64_t tick) const noexcept {
    return static_cast<double>(timestamp_ms(tick) % 86'400'000) / 86'400'000.0;
  }
};

inline double diurnal_factor(double day_fraction) noexcept {
  return std::sin(2.0 * std::numbers::pi * day_fraction - std::numbers::pi / 2.0);
}

inline std::uint16_t clamp_adc(double v) noexcept {
  const double r = std::round(v);
  if (!(r > 0.0)) return 0;
  if (r >= kAdcMax) return kAdcMax;
  return static_cast<std::uint16_t>(r);
}

/// Deterministic in (profile, seed, tick).
inline SensorValues generate_raw(const NodeProfile& p, const SimClock& clock, std::uint64_t seed,
                                 std::uint64_t tick) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(p.node_id), static_cast<std::uint32_t>(tick),
                    static_cast<std::uint32_t>(tick >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double wave = diurnal_factor(clock.day_fraction(tick));
  SensorValues out;
  for (Sensor s : kAllSensors) {
    const auto i = index_of(s);
    double v = p.baseline[i];
    if (s == Sensor::Light || s == Sensor::Temperature) v += p.amplitude[i] * wave;
    if (s == Sensor::Voltage) v -= p.voltage_decay * static_cast<double>(tick);
    const double z = gauss(rng);
    out[i] = v + p.noise_sd[i] * z;
  }
  return out;
}

inline AdcValues generate_reading(const NodeProfile& p, const SimClock& clock, std::uint64_t seed,
                                  std::uint64_t tick) {
  const auto raw = generate_raw(p, clock, seed, tick);
  AdcValues out;
  for (std::size_t i = 0; i < kSensorCount; ++i) out[i] = clamp_adc(raw[i]);
  return out;
}

enum class FaultKind { Stuck, Drift, Dropout, Death };

struct FaultEvent {
  std::uint64_t start_tick = 0;
  std::uint8_t node_id = 0;
  std::optional<Sensor> sensor;  // Stuck and Drift only
  FaultKind kind = FaultKind::Stuck;
  double argument = 0.0;  // stuck value, drift rate, or dropout duration
};

class FaultScript {
 public:
  FaultScript() = default;

  explicit FaultScript(std::vector<FaultEvent> events) : events_(std::move(events)) { validate(); }

  const std::vector<FaultEvent>& events() const noexcept { return events_; }
  bool empty() const noexcept { return events_.empty(); }

  /// Whole-frame faults: true when the node sends nothing this tick.
  bool suppressed(std::uint8_t node, std::uint64_t tick) const noexcept {
    for (const auto& e : events_) {
      if (e.node_id != node || tick < e.start_tick) continue;
      if (e.kind == FaultKind::Death) return true;
      if (e.kind == FaultKind::Dropout && tick < e.start_tick + static_cast<std::uint64_t>(e.argument)) return true;
    }
    return false;
  }

  /// Applies value faults to a node's unclamped readings.
  SensorValues apply(SensorValues v, std::uint8_t node, std::uint64_t tick) const noexcept {
    for (const auto& e : events_) {
      if (e.node_id != node || tick < e.start_tick || !e.sensor) continue;
      const auto i = index_of(*e.sensor);
      if (e.kind == FaultKind::Stuck) v[i] = e.argument;
      if (e.kind == FaultKind::Drift) v[i] += e.argument * static_cast<double>(tick - e.start_tick);
    }
    return v;
  }

  static FaultScript parse(std::istream& in, const std::string& source = "fault script") {
    std::vector<FaultEvent> events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::vector<std::string> tok;
      for (std::string t; fields >> t;) tok.push_back(t);
      if (tok.empty()) continue;
      auto fail = [&](const std::string& why) -> void {
        throw Error(ErrorCode::ParseError, source + ": line " + std::to_string(n) + ": " + why);
      };
      if (tok.size() < 4) fail("expected '<start_tick> <node_id> <sensor|-> <kind> [argument]'");
      FaultEvent e;
      try {
        std::size_t used = 0;
        if (tok[0].starts_with('-')) fail("start_tick must be non-negative");
        e.start_tick = std::stoull(tok[0], &used);
        if (used != tok[0].size()) fail("bad start_tick '" + tok[0] + "'");
        const auto node = std::stoul(tok[1], &used);
        if (used != tok[1].size() || node > 255) fail("bad node_id '" + tok[1] + "'");
        e.node_id = static_cast<std::uint8_t>(node);
      } catch (const std::logic_error&) {
        fail("bad number");
      }
      const std::string& kind = tok[3];
      if (kind == "stuck") e.kind = FaultKind::Stuck;
      else if (kind == "drift") e.kind = FaultKind::Drift;
      else if (kind == "dropout") e.kind = FaultKind::Dropout;
      else if (kind == "death") e.kind = FaultKind::Death;
      else fail("unknown fault kind '" + kind + "' (stuck, drift, dropout, death)");

      const bool value_fault = e.kind == FaultKind::Stuck || e.kind == FaultKind::Drift;
      if (value_fault) {
        e.sensor = parse_sensor(tok[2]);
        if (!e.sensor) fail("unknown sensor '" + tok[2] + "'");
      } else if (tok[2] != "-" && !parse_sensor(tok[2])) {
        fail("unknown sensor '" + tok[2] + "'");
      }
      const bool needs_arg = e.kind != FaultKind::Death;
      if (tok.size() != (needs_arg ? 5u : 4u)) fail(needs_arg ? "missing or extra argument" : "death takes no argument");
      if (needs_arg) {
        try {
          std::size_t used = 0;
          e.argument = std::stod(tok[4], &used);
          if (used != tok[4].size()) fail("bad argument '" + tok[4] + "'");
        } catch (const std::logic_error&) {
          fail("bad argument '" + tok[4] + "'");
        }
        if (e.kind == FaultKind::Dropout && !(e.argument >= 1.0 && e.argument == std::floor(e.argument))) {
          fail("dropout duration must be a positive whole number of ticks");
        }
        if (e.kind == FaultKind::Stuck && !(e.argument >= 0.0 && e.argument <= kAdcMax)) {
          fail("stuck value must be an ADC count in 0..1023");
        }
      }
      events.push_back(e);
    }
    try {
      return FaultScript(std::move(events));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, source + ": " + e.what());
    }
  }

  static FaultScript load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open fault script " + path.string());
    return parse(in, path.string());
  }

 private:
  void validate() const {
    std::set<std::pair<std::uint8_t, Sensor>> seen;
    for (const auto& e : events_) {
      if (!e.sensor) continue;
      if (!seen.emplace(e.node_id, *e.sensor).second) {
        throw Error(ErrorCode::InvalidConfig, "more than one value fault on node " + std::to_string(e.node_id) +
                                                  " " + std::string(sensor_name(*e.sensor)));
      }
    }
  }

  std::vector<FaultEvent> events_;
};

/// Frames for every live node at one tick. Sequence number = tick.
class Simulator {
 public:
  Simulator(std::vector<NodeProfile> profiles, FaultScript script, SimClock clock, std::uint64_t seed)
      : profiles_(std::move(profiles)), script_(std::move(script)), clock_(clock), seed_(seed) {
    clock_.validate();
    std::set<std::uint8_t> ids;
    for (const auto& p : profiles_) {
      p.validate();
      if (!ids.insert(p.node_id).second) {
        throw Error(ErrorCode::InvalidConfig, "duplicate node id " + std::to_string(p.node_id));
      }
    }
  }

  const SimClock& clock() const noexcept { return clock_; }
  const std::vector<NodeProfile>& profiles() const noexcept { return profiles_; }

  std::vector<RawFrame> frames(std::uint64_t tick) const {
    std::vector<RawFrame> out;
    for (const auto& p : profiles_) {
      if (script_.suppressed(p.node_id, tick)) continue;
      const auto raw = script_.apply(generate_raw(p, clock_, seed_, tick), p.node_id, tick);
      RawFrame f;
      f.node_id = p.node_id;
      f.sequence = static_cast<std::uint32_t>(tick);
      f.timestamp_ms = clock_.timestamp_ms(tick);
      for (std::size_t i = 0; i < kSensorCount; ++i) f.adc[i] = clamp_adc(raw[i]);
      out.push_back(f);
    }
    return out;
  }

  std::vector<std::uint8_t> encoded(std::uint64_t tick) const {
    std::vector<std::uint8_t> out;
    for (const auto& f : frames(tick)) {
      const auto bytes = encode_frame(f);
      out.insert(out.end(), bytes.begin(), bytes.end());
    }
    return out;
  }

 private:
  std::vector<NodeProfile> profiles_;
  FaultScript script_;
  SimClock clock_;
  std::uint64_t seed_;
};

}  // namespace smartwsn
