#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "smartwsn/conversion.hpp"

namespace fixture {

inline smartwsn::EngineeringInstance instance(std::uint64_t ts, double light, double temp, double ax, double ay,
                                              double volt, std::uint32_t node = 1) {
  smartwsn::EngineeringInstance inst;
  inst.node_id = node;
  inst.timestamp_ms = ts;
  inst.values = {light, temp, ax, ay, volt};
  return inst;
}

inline smartwsn::EngineeringInstance random_instance(std::mt19937_64& rng, std::uint64_t ts, std::uint32_t node = 1) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  return instance(ts, 50.0 * u(rng), 20.0 * u(rng), 0.8 * u(rng), 0.6 * u(rng), 3.0 * u(rng), node);
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() / ("smartwsn_" + tag + "_" + std::to_string(stamp));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture
