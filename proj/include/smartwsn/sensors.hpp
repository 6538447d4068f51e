#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace smartwsn {

// Wire order of the five sensed attributes.
enum class Sensor : std::size_t { Light = 0, Temperature, AccelX, AccelY, Voltage };

inline constexpr std::size_t kSensorCount = 5;

inline constexpr std::array<Sensor, kSensorCount> kAllSensors = {
    Sensor::Light, Sensor::Temperature, Sensor::AccelX, Sensor::AccelY, Sensor::Voltage};

constexpr std::size_t index_of(Sensor s) noexcept { return static_cast<std::size_t>(s); }

constexpr std::string_view sensor_name(Sensor s) noexcept {
  switch (s) {
    case Sensor::Light: return "light";
    case Sensor::Temperature: return "temperature";
    case Sensor::AccelX: return "accel_x";
    case Sensor::AccelY: return "accel_y";
    case Sensor::Voltage: return "voltage";
  }
  return "?";
}

// Short form used in model file names (node_3_temp_short.model).
constexpr std::string_view sensor_file_tag(Sensor s) noexcept {
  switch (s) {
    case Sensor::Light: return "light";
    case Sensor::Temperature: return "temp";
    case Sensor::AccelX: return "ax";
    case Sensor::AccelY: return "ay";
    case Sensor::Voltage: return "volt";
  }
  return "?";
}

inline std::optional<Sensor> parse_sensor(std::string_view text) {
  for (Sensor s : kAllSensors) {
    if (text == sensor_name(s) || text == sensor_file_tag(s)) return s;
  }
  if (text == "temp_c") return Sensor::Temperature;
  return std::nullopt;
}

using SensorValues = std::array<double, kSensorCount>;

}  // namespace smartwsn
