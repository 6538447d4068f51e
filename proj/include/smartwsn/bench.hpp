#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/detector.hpp"
#include "smartwsn/error.hpp"
#include "smartwsn/regressors/predictor.hpp"
#include "smartwsn/window_store.hpp"

namespace smartwsn {

struct EnergyModel {
  double cpu_power_watts = 0.5;
  double radio_power_watts = 1.221;  // 330 mA at 3.7 V
  double radio_rate_bps = 1'000'000.0;
  double message_bits = 224.0;

  void validate() const {
    if (!(cpu_power_watts > 0 && radio_power_watts > 0 && radio_rate_bps > 0 && message_bits > 0)) {
      throw Error(ErrorCode::InvalidConfig, "energy model parameters must be positive");
    }
  }

  double radio_joules() const noexcept { return radio_power_watts * (message_bits / radio_rate_bps); }
};

inline double energy_per_instance(double predict_time_s, const EnergyModel& em) noexcept {
  return em.cpu_power_watts * predict_time_s + em.radio_joules();
}

inline constexpr std::size_t kHistogramBuckets = 11;
using Histogram = std::array<std::uint64_t, kHistogramBuckets>;

/// "0-10", "10-20", ... "90-100", ">100". Buckets include their lower bound.
inline std::string bucket_label(std::size_t i) {
  if (i + 1 >= kHistogramBuckets) return ">100";
  return std::to_string(i * 10) + "-" + std::to_string(i * 10 + 10);
}

inline std::size_t bucket_of(double deviation_pct) noexcept {
  if (!(deviation_pct < 100.0)) return kHistogramBuckets - 1;
  if (!(deviation_pct > 0.0)) return 0;
  return static_cast<std::size_t>(deviation_pct / 10.0);
}

inline Histogram error_histogram(std::span<const double> deviations) {
  Histogram h{};
  for (double d : deviations) ++h[bucket_of(d)];
  return h;
}

struct AlgorithmResult {
  Algorithm algorithm = Algorithm::DecisionStump;
  double fit_time_s = 0.0;      // summed over targets
  double predict_time_s = 0.0;  // mean per instance
  double energy_j = 0.0;        // per instance
  double total_error_rate_pct = 0.0;
  Histogram histogram{};
  std::size_t evaluated = 0;
};

struct BenchReport {
  std::vector<AlgorithmResult> results;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

struct BenchOptions {
  double holdout = 0.3;  // trailing fraction used for testing
  EnergyModel energy;
  RegressorOptions regressor;
  double epsilon = 1e-6;

  void validate() const {
    if (!(holdout > 0.0 && holdout < 1.0)) throw Error(ErrorCode::InvalidConfig, "holdout must be in (0, 1)");
    energy.validate();
    if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must be > 0");
  }
};

/// Chronological split: the first rows train, the trailing `holdout` share tests.
inline std::pair<Dataset, Dataset> chronological_split(const Dataset& d, double holdout) {
  const auto train = static_cast<std::size_t>(std::floor(static_cast<double>(d.size()) * (1.0 - holdout)));
  if (train == 0 || train >= d.size()) {
    throw Error(ErrorCode::EmptyDataset, "dataset of " + std::to_string(d.size()) +
                                             " rows is too small to split with holdout " + std::to_string(holdout));
  }
  return {d.slice(0, train), d.slice(train, d.size())};
}

/// Each task is one target's dataset; errors and timings pool over tasks.
inline BenchReport run_bench(std::span<const Dataset> tasks, std::span<const Algorithm> algorithms,
                             const BenchOptions& opt = {}) {
  opt.validate();
  if (tasks.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to benchmark");
  if (algorithms.empty()) throw Error(ErrorCode::UnknownAlgorithm, "no algorithms selected");
  std::vector<std::pair<Dataset, Dataset>> splits;
  BenchReport report;
  for (const auto& d : tasks) {
    splits.push_back(chronological_split(d, opt.holdout));
    report.train_rows += splits.back().first.size();
    report.test_rows += splits.back().second.size();
  }

  using clock = std::chrono::steady_clock;
  for (Algorithm alg : algorithms) {
    AlgorithmResult r;
    r.algorithm = alg;
    std::vector<double> deviations;
    double predict_total = 0.0;
    for (const auto& [train, test] : splits) {
      const auto [model, fit] = fit_timed(alg, train, opt.regressor);
      r.fit_time_s += fit.fit_duration_s;
      std::vector<double> predicted(test.size());
      const auto start = clock::now();
      for (std::size_t i = 0; i < test.size(); ++i) predicted[i] = model.predict(test.row(i));
      predict_total += std::chrono::duration<double>(clock::now() - start).count();
      for (std::size_t i = 0; i < test.size(); ++i) {
        deviations.push_back(deviation_percent(predicted[i], test.target(i), opt.epsilon));
      }
    }
    r.evaluated = deviations.size();
    r.predict_time_s = predict_total / static_cast<double>(r.evaluated);
    r.energy_j = energy_per_instance(r.predict_time_s, opt.energy);
    r.total_error_rate_pct = numeric::stable_mean(deviations);
    r.histogram = error_histogram(deviations);
    report.results.push_back(r);
  }
  return report;
}

inline BenchReport run_bench(const Dataset& d, std::span<const Algorithm> algorithms, const BenchOptions& opt = {}) {
  return run_bench(std::span<const Dataset>(&d, 1), algorithms, opt);
}

/// One dataset per target sensor from window rows (all rows used).
inline std::vector<Dataset> bench_tasks(std::span<const EngineeringInstance> rows, std::span<const Sensor> targets) {
  if (rows.empty()) throw Error(ErrorCode::EmptyDataset, "no rows to benchmark");
  std::vector<Dataset> out;
  for (Sensor s : targets) out.push_back(snapshot_training_set(rows, s, rows.size()));
  return out;
}

inline constexpr std::string_view kReportCsvHeader = "algorithm,predict_time_s,energy_j,total_error_rate_pct,fit_time_s";

inline void write_report_csv(std::ostream& out, const BenchReport& report) {
  out << kReportCsvHeader << '\n';
  char buf[256];
  for (const auto& r : report.results) {
    std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%.6g,%.9g\n", std::string(algorithm_name(r.algorithm)).c_str(),
                  r.predict_time_s, r.energy_j, r.total_error_rate_pct, r.fit_time_s);
    out << buf;
  }
}

/// bucket,<algorithm>... with one row per bucket.
inline void write_histogram_csv(std::ostream& out, const BenchReport& report) {
  out << "bucket";
  for (const auto& r : report.results) out << ',' << algorithm_name(r.algorithm);
  out << '\n';
  for (std::size_t b = 0; b < kHistogramBuckets; ++b) {
    out << bucket_label(b);
    for (const auto& r : report.results) out << ',' << r.histogram[b];
    out << '\n';
  }
}

}  // namespace smartwsn
