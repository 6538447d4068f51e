#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/numeric.hpp"

namespace smartwsn {

inline constexpr std::size_t kDefaultK = 1;

/// Instance-based regressor: mean target of the k nearest training rows by
/// Euclidean distance after per-feature min-max normalization. Distance ties
/// go to the lower row index.
struct KnnModel {
  std::size_t k = kDefaultK;
  std::size_t arity = 0;
  std::vector<double> mins;
  std::vector<double> ranges;      // 0 for a constant feature
  std::vector<double> normalized;  // row-major training features
  std::vector<double> targets;

  double normalize(std::size_t j, double v) const noexcept {
    return ranges[j] > 0.0 ? (v - mins[j]) / ranges[j] : 0.0;
  }

  /// Row indices of the k nearest neighbours, nearest first.
  std::vector<std::size_t> neighbors(std::span<const double> x) const {
    std::vector<double> q(arity);
    for (std::size_t j = 0; j < arity; ++j) q[j] = normalize(j, x[j]);
    std::vector<std::pair<double, std::size_t>> dist(targets.size());
    for (std::size_t r = 0; r < targets.size(); ++r) {
      double acc = 0.0;
      for (std::size_t j = 0; j < arity; ++j) {
        const double diff = normalized[r * arity + j] - q[j];
        acc += diff * diff;
      }
      dist[r] = {acc, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
    return out;
  }

  double predict(std::span<const double> x) const {
    const auto nn = neighbors(x);
    return numeric::stable_mean(nn, [&](std::size_t r) { return targets[r]; });
  }

  void write(ModelWriter& w) const {
    w.key("k").integer(static_cast<std::int64_t>(k));
    w.key("mins").reals(mins);
    w.key("ranges").reals(ranges);
    w.key("rows").integer(static_cast<std::int64_t>(targets.size()));
    for (std::size_t r = 0; r < targets.size(); ++r) {
      w.key("row");
      for (std::size_t j = 0; j < arity; ++j) w.real(normalized[r * arity + j]);
      w.real(targets[r]);
    }
  }

  static KnnModel read(ModelReader& r) {
    KnnModel m;
    r.expect("k");
    m.k = r.count();
    r.expect("mins");
    m.mins = r.reals();
    r.expect("ranges");
    m.ranges = r.reals();
    m.arity = m.mins.size();
    if (m.ranges.size() != m.arity) r.fail("mins/ranges arity differ");
    r.expect("rows");
    const std::size_t n = r.count();
    if (m.k == 0 || m.k > n) r.fail("k out of range");
    m.normalized.reserve(n * m.arity);
    m.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      r.expect("row");
      for (std::size_t j = 0; j < m.arity; ++j) m.normalized.push_back(r.real());
      m.targets.push_back(r.real());
    }
    return m;
  }
};

inline KnnModel fit_knn_model(const Dataset& d, std::size_t k = kDefaultK) {
  d.require_non_empty("k-NN");
  if (k == 0 || k > d.size()) {
    throw Error(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " with " +
                                          std::to_string(d.size()) + " training rows");
  }
  KnnModel m;
  m.k = k;
  m.arity = d.arity();
  m.mins.assign(m.arity, 0.0);
  m.ranges.assign(m.arity, 0.0);
  for (std::size_t j = 0; j < m.arity; ++j) {
    double lo = d.feature(0, j), hi = lo;
    for (std::size_t r = 1; r < d.size(); ++r) {
      lo = std::min(lo, d.feature(r, j));
      hi = std::max(hi, d.feature(r, j));
    }
    m.mins[j] = lo;
    m.ranges[j] = hi - lo;
  }
  m.normalized.resize(d.size() * m.arity);
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t j = 0; j < m.arity; ++j) m.normalized[r * m.arity + j] = m.normalize(j, d.feature(r, j));
  }
  m.targets = d.targets();
  return m;
}

}  // namespace smartwsn
