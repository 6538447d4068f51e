#pragma once

// Raw 10-bit ADC counts to engineering units.
//
//   light        adc / 1023 * 100                     [%]
//   temperature  Steinhart-Hart on a 10k thermistor   [degC]
//   voltage      1.223 * 1023 / adc (band-gap ref)    [V]
//   accel        (adc - zero_offset) / counts_per_g   [g]
//
// ADC values that make a formula singular are rejected, never clamped.

#include <cmath>
#include <cstdint>
#include <string>

#include "smartwsn/error.hpp"
#include "smartwsn/sensors.hpp"
#include "smartwsn/wire.hpp"

namespace smartwsn {

struct EngineeringInstance {
  std::uint32_t node_id = 0;
  std::uint64_t timestamp_ms = 0;
  SensorValues values{};  // indexed by Sensor

  double& operator[](Sensor s) noexcept { return values[index_of(s)]; }
  double operator[](Sensor s) const noexcept { return values[index_of(s)]; }

  friend bool operator==(const EngineeringInstance&, const EngineeringInstance&) = default;
};

class AccelCalibration {
 public:
  AccelCalibration() = default;
  AccelCalibration(double zero_offset, double counts_per_g)
      : zero_offset_(zero_offset), counts_per_g_(counts_per_g) {
    if (counts_per_g == 0.0 || !std::isfinite(counts_per_g)) {
      throw Error(ErrorCode::InvalidCalibration, "counts_per_g must be non-zero");
    }
  }

  double zero_offset() const noexcept { return zero_offset_; }
  double counts_per_g() const noexcept { return counts_per_g_; }

 private:
  double zero_offset_ = 512.0;
  double counts_per_g_ = 205.0;
};

namespace conversion_detail {

inline void check_range(int adc, int lo, int hi, std::string_view what) {
  if (adc < lo || adc > hi) {
    throw Error(ErrorCode::Unconvertible, std::string(what) + " adc " + std::to_string(adc) +
                                              " outside [" + std::to_string(lo) + ", " +
                                              std::to_string(hi) + "]");
  }
}

}  // namespace conversion_detail

inline double convert_light(int adc) {
  conversion_detail::check_range(adc, 0, kAdcMax, "light");
  return adc / 1023.0 * 100.0;
}

inline constexpr double kThermistorA = 0.001010024;
inline constexpr double kThermistorB = 0.000242127;
inline constexpr double kThermistorC = 0.000000146;

inline double convert_temperature(int adc) {
  conversion_detail::check_range(adc, 1, kAdcMax - 1, "temperature");
  const double resistance = 10000.0 * (1023.0 - adc) / adc;
  const double ln_r = std::log(resistance);
  const double inv_kelvin = kThermistorA + kThermistorB * ln_r + kThermistorC * ln_r * ln_r * ln_r;
  return 1.0 / inv_kelvin - 273.15;
}

inline constexpr double kBandGapVolts = 1.223;

inline double convert_voltage(int adc) {
  conversion_detail::check_range(adc, 1, kAdcMax, "voltage");
  return kBandGapVolts * 1023.0 / adc;
}

inline double convert_accel(int adc, const AccelCalibration& cal) {
  conversion_detail::check_range(adc, 0, kAdcMax, "accel");
  return (adc - cal.zero_offset()) / cal.counts_per_g();
}

inline EngineeringInstance to_instance(const RawFrame& frame, const AccelCalibration& cal = {}) {
  EngineeringInstance inst;
  inst.node_id = frame.node_id;
  inst.timestamp_ms = frame.timestamp_ms;
  inst[Sensor::Light] = convert_light(frame.reading(Sensor::Light));
  inst[Sensor::Temperature] = convert_temperature(frame.reading(Sensor::Temperature));
  inst[Sensor::AccelX] = convert_accel(frame.reading(Sensor::AccelX), cal);
  inst[Sensor::AccelY] = convert_accel(frame.reading(Sensor::AccelY), cal);
  inst[Sensor::Voltage] = convert_voltage(frame.reading(Sensor::Voltage));
  return inst;
}

}  // namespace smartwsn
