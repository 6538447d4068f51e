#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/numeric.hpp"

namespace smartwsn {

/// Candidate split threshold between two consecutive distinct sorted values,
/// guaranteed to satisfy lo < t <= hi so that `x < t` separates them.
inline double split_midpoint(double lo, double hi) noexcept {
  double t = lo + (hi - lo) / 2.0;
  if (!(t > lo)) t = hi;
  return t;
}

/// Sum of squared errors about the mean for the targets of `rows`.
inline double sse_of(const Dataset& d, std::span<const std::size_t> rows) {
  const double mean = numeric::stable_mean(rows, [&](std::size_t r) { return d.target(r); });
  double acc = 0.0;
  for (std::size_t r : rows) acc += (d.target(r) - mean) * (d.target(r) - mean);
  return acc;
}

/// One-level regression tree: x[feature] < threshold ? left : right.
struct StumpModel {
  std::optional<std::size_t> feature;  // empty: single leaf predicting `left`
  double threshold = 0.0;
  double left = 0.0;
  double right = 0.0;
  double sse = 0.0;  // training SSE of the fitted split (or of the single leaf)

  double predict(std::span<const double> x) const noexcept {
    if (!feature) return left;
    return x[*feature] < threshold ? left : right;
  }

  void write(ModelWriter& w) const {
    if (feature) {
      w.key("split").integer(static_cast<std::int64_t>(*feature)).real(threshold).real(left).real(right);
    } else {
      w.key("leaf").real(left);
    }
    w.key("sse").real(sse);
  }

  static StumpModel read(ModelReader& r) {
    StumpModel m;
    auto kind = r.token();
    if (kind == "split") {
      m.feature = r.count();
      m.threshold = r.real();
      m.left = r.real();
      m.right = r.real();
    } else if (kind == "leaf") {
      m.left = r.real();
      m.right = m.left;
    } else {
      r.fail("expected 'split' or 'leaf'");
    }
    r.expect("sse");
    m.sse = r.real();
    return m;
  }
};

/// Exhaustive search over every feature and every midpoint between
/// consecutive distinct values for the split with minimum total SSE.
/// Ties keep the lowest feature index, then the lowest threshold.
inline StumpModel fit_stump_model(const Dataset& d) {
  d.require_non_empty("decision stump");
  const std::size_t n = d.size();
  const auto all = numeric::iota_indices(n);
  const double mean = numeric::stable_mean(d.targets());
  const double root_sse = sse_of(d, all);

  StumpModel m;
  m.left = m.right = mean;
  m.sse = root_sse;

  double best = root_sse;
  std::optional<std::size_t> best_feature;
  double best_threshold = 0.0;
  const double tol = 1e-12 * root_sse;

  std::vector<std::size_t> order(n);
  std::vector<double> prefix(n + 1), prefix_sq(n + 1);
  for (std::size_t f = 0; f < d.arity(); ++f) {
    order = all;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return d.feature(a, f) < d.feature(b, f); });
    prefix[0] = prefix_sq[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = d.target(order[i]) - mean;
      prefix[i + 1] = prefix[i] + y;
      prefix_sq[i + 1] = prefix_sq[i] + y * y;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double lo = d.feature(order[i], f);
      const double hi = d.feature(order[i + 1], f);
      if (!(lo < hi)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = static_cast<double>(n - i - 1);
      const double sl = prefix[i + 1];
      const double sr = prefix[n] - sl;
      const double ql = prefix_sq[i + 1];
      const double qr = prefix_sq[n] - ql;
      const double sse = std::max(0.0, ql - sl * sl / nl) + std::max(0.0, qr - sr * sr / nr);
      if (sse < best - tol) {
        best = sse;
        best_feature = f;
        best_threshold = split_midpoint(lo, hi);
      }
    }
  }
  if (!best_feature) return m;

  std::vector<std::size_t> left_rows, right_rows;
  for (std::size_t r = 0; r < n; ++r) {
    (d.feature(r, *best_feature) < best_threshold ? left_rows : right_rows).push_back(r);
  }
  m.feature = best_feature;
  m.threshold = best_threshold;
  m.left = numeric::stable_mean(left_rows, [&](std::size_t r) { return d.target(r); });
  m.right = numeric::stable_mean(right_rows, [&](std::size_t r) { return d.target(r); });
  m.sse = sse_of(d, left_rows) + sse_of(d, right_rows);
  return m;
}

}  // namespace smartwsn
