#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "smartwsn/dataset.hpp"

namespace smartwsn::numeric {

/// Mean computed as first + sum(v - first) / n, which returns a constant
/// sequence's value exactly.
template <typename Range, typename Proj>
double stable_mean(const Range& range, Proj proj) {
  auto it = std::begin(range);
  auto end = std::end(range);
  if (it == end) return 0.0;
  const double first = proj(*it);
  double acc = 0.0;
  std::size_t n = 0;
  for (; it != end; ++it, ++n) acc += proj(*it) - first;
  return first + acc / static_cast<double>(n);
}

template <typename Range>
double stable_mean(const Range& range) {
  return stable_mean(range, [](double v) { return v; });
}

/// Population standard deviation.
template <typename Range>
double population_sd(const Range& range) {
  const double mean = stable_mean(range);
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : range) {
    acc += (v - mean) * (v - mean);
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

/// Dense row-major square matrix solve by Gaussian elimination with partial
/// pivoting. Returns nullopt when a pivot falls to `singular_tol` or below.
inline std::optional<std::vector<double>> solve(std::vector<double> a, std::vector<double> b,
                                                double singular_tol) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (!(std::abs(a[pivot * n + col]) > singular_tol)) return std::nullopt;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= factor * a[col * n + c];
      b[r] -= factor * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t c = i + 1; c < n; ++c) acc -= a[i * n + c] * x[c];
    x[i] = acc / a[i * n + i];
  }
  return x;
}

inline constexpr double kRidgeLambda = 1e-8;

struct LinearFit {
  double intercept = 0.0;
  std::vector<double> coefficients;  // one per requested feature, same order
};

/// Least squares with intercept over `features` (column indices) of the rows
/// in `rows`. Works on centered data so the intercept is never penalized.
/// When the centered normal matrix is singular: ridge with kRidgeLambda if
/// `ridge_on_singular`, otherwise nullopt.
inline std::optional<LinearFit> least_squares(const Dataset& data, std::span<const std::size_t> rows,
                                              std::span<const std::size_t> features,
                                              bool ridge_on_singular) {
  const std::size_t p = features.size();
  LinearFit fit;
  fit.intercept = stable_mean(rows, [&](std::size_t r) { return data.target(r); });
  fit.coefficients.assign(p, 0.0);
  if (p == 0 || rows.empty()) return fit;

  std::vector<double> means(p);
  for (std::size_t j = 0; j < p; ++j) {
    means[j] = stable_mean(rows, [&](std::size_t r) { return data.feature(r, features[j]); });
  }
  std::vector<double> a(p * p, 0.0);
  std::vector<double> b(p, 0.0);
  std::vector<double> centered(p);
  for (std::size_t r : rows) {
    for (std::size_t j = 0; j < p; ++j) centered[j] = data.feature(r, features[j]) - means[j];
    const double yc = data.target(r) - fit.intercept;
    for (std::size_t j = 0; j < p; ++j) {
      b[j] += centered[j] * yc;
      for (std::size_t k = j; k < p; ++k) a[j * p + k] += centered[j] * centered[k];
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k) a[j * p + k] = a[k * p + j];

  // Singularity is judged on the unit-diagonal (correlation) scaling so that
  // features of very different magnitude are treated alike.
  bool singular = false;
  std::vector<double> scale(p);
  for (std::size_t j = 0; j < p; ++j) {
    if (!(a[j * p + j] > 0.0)) singular = true;
    scale[j] = std::sqrt(a[j * p + j]);
  }
  std::optional<std::vector<double>> beta;
  if (!singular) {
    std::vector<double> scaled(p * p);
    std::vector<double> rhs(p);
    for (std::size_t j = 0; j < p; ++j) {
      rhs[j] = b[j] / scale[j];
      for (std::size_t k = 0; k < p; ++k) scaled[j * p + k] = a[j * p + k] / (scale[j] * scale[k]);
    }
    if (auto z = solve(std::move(scaled), std::move(rhs), 1e-10)) {
      for (std::size_t j = 0; j < p; ++j) (*z)[j] /= scale[j];
      beta = std::move(z);
    }
  }
  if (!beta) {
    if (!ridge_on_singular) return std::nullopt;
    for (std::size_t j = 0; j < p; ++j) a[j * p + j] += kRidgeLambda;
    beta = solve(std::move(a), std::move(b), 0.0);
    if (!beta) return std::nullopt;
  }
  fit.coefficients = std::move(*beta);
  for (std::size_t j = 0; j < p; ++j) fit.intercept -= fit.coefficients[j] * means[j];
  return fit;
}

inline std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace smartwsn::numeric
