#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/numeric.hpp"

namespace smartwsn {

inline constexpr std::size_t kDefaultTableBins = 10;

/// Equal-width discretization of one feature over its training range.
/// Values outside the range clamp to the edge bins.
struct Binning {
  double min = 0.0;
  double width = 0.0;  // 0 when the feature was constant

  std::uint16_t bin(double x, std::size_t bins) const noexcept {
    if (!(width > 0.0)) return 0;
    const double raw = std::floor((x - min) / width);
    if (!(raw >= 0.0)) return 0;
    const double top = static_cast<double>(bins - 1);
    return static_cast<std::uint16_t>(raw > top ? top : raw);
  }
};

/// Lookup table keyed on the discretized values of a selected feature subset.
/// Misses predict the global training mean.
struct DecisionTableModel {
  using Key = std::vector<std::uint16_t>;

  std::size_t bins = kDefaultTableBins;
  double global_mean = 0.0;
  std::vector<std::size_t> selected;  // ascending feature indices
  std::vector<Binning> binning;       // one per feature of the fitted arity
  std::map<Key, double> cells;

  Key key_for(std::span<const double> x) const {
    Key key(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
      key[i] = binning[selected[i]].bin(x[selected[i]], bins);
    }
    return key;
  }

  double predict(std::span<const double> x) const {
    if (selected.empty()) return global_mean;
    auto it = cells.find(key_for(x));
    return it == cells.end() ? global_mean : it->second;
  }

  void write(ModelWriter& w) const {
    w.key("bins").integer(static_cast<std::int64_t>(bins));
    w.key("global_mean").real(global_mean);
    w.key("selected").integer(static_cast<std::int64_t>(selected.size()));
    for (auto f : selected) w.integer(static_cast<std::int64_t>(f));
    w.key("binning").integer(static_cast<std::int64_t>(binning.size()));
    for (const auto& b : binning) w.real(b.min).real(b.width);
    w.key("cells").integer(static_cast<std::int64_t>(cells.size()));
    for (const auto& [key, mean] : cells) {
      w.key("cell");
      for (auto k : key) w.integer(k);
      w.real(mean);
    }
  }

  static DecisionTableModel read(ModelReader& r) {
    DecisionTableModel m;
    r.expect("bins");
    m.bins = r.count(65535);
    if (m.bins == 0) r.fail("bins must be positive");
    r.expect("global_mean");
    m.global_mean = r.real();
    r.expect("selected");
    m.selected.resize(r.count());
    for (auto& f : m.selected) f = r.count();
    r.expect("binning");
    m.binning.resize(r.count());
    for (auto& b : m.binning) {
      b.min = r.real();
      b.width = r.real();
    }
    for (auto f : m.selected) {
      if (f >= m.binning.size()) r.fail("selected feature out of range");
    }
    r.expect("cells");
    const std::size_t ncells = r.count();
    for (std::size_t c = 0; c < ncells; ++c) {
      r.expect("cell");
      Key key(m.selected.size());
      for (auto& k : key) k = static_cast<std::uint16_t>(r.count(65535));
      m.cells[std::move(key)] = r.real();
    }
    return m;
  }
};

namespace table_detail {

inline DecisionTableModel::Key row_key(const Dataset& d, std::size_t row,
                                       const std::vector<std::size_t>& subset,
                                       const std::vector<Binning>& binning, std::size_t bins) {
  DecisionTableModel::Key key(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) {
    key[i] = binning[subset[i]].bin(d.feature(row, subset[i]), bins);
  }
  return key;
}

/// Leave-one-out mean squared error of the table keyed on `subset`. A row
/// alone in its cell is predicted by the mean of all other rows.
inline double loo_mse(const Dataset& d, const std::vector<std::size_t>& subset,
                      const std::vector<Binning>& binning, std::size_t bins) {
  const std::size_t n = d.size();
  if (n < 2) return 0.0;
  struct Cell {
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<DecisionTableModel::Key, Cell> cells;
  std::vector<DecisionTableModel::Key> keys(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    keys[r] = row_key(d, r, subset, binning, bins);
    auto& cell = cells[keys[r]];
    cell.sum += d.target(r);
    ++cell.count;
    total += d.target(r);
  }
  double err = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cell = cells[keys[r]];
    const double y = d.target(r);
    const double pred = cell.count > 1 ? (cell.sum - y) / static_cast<double>(cell.count - 1)
                                       : (total - y) / static_cast<double>(n - 1);
    err += (pred - y) * (pred - y);
  }
  return err / static_cast<double>(n);
}

}  // namespace table_detail

/// Greedy forward selection: repeatedly add the feature that lowers the
/// leave-one-out MSE the most; stop when no addition strictly improves.
inline DecisionTableModel fit_decision_table_model(const Dataset& d, std::size_t bins = kDefaultTableBins) {
  d.require_non_empty("decision table");
  if (bins == 0 || bins > 65535) throw Error(ErrorCode::InvalidConfig, "decision table bins out of range");
  DecisionTableModel m;
  m.bins = bins;
  m.global_mean = numeric::stable_mean(d.targets());
  m.binning.resize(d.arity());
  for (std::size_t f = 0; f < d.arity(); ++f) {
    double lo = d.feature(0, f), hi = lo;
    for (std::size_t r = 1; r < d.size(); ++r) {
      lo = std::min(lo, d.feature(r, f));
      hi = std::max(hi, d.feature(r, f));
    }
    m.binning[f].min = lo;
    m.binning[f].width = (hi - lo) / static_cast<double>(bins);
  }

  std::vector<std::size_t> selected;
  double current = table_detail::loo_mse(d, selected, m.binning, bins);
  while (selected.size() < d.arity()) {
    std::optional<std::size_t> best_feature;
    double best = current;
    for (std::size_t f = 0; f < d.arity(); ++f) {
      if (std::find(selected.begin(), selected.end(), f) != selected.end()) continue;
      auto trial = selected;
      trial.insert(std::upper_bound(trial.begin(), trial.end(), f), f);
      const double err = table_detail::loo_mse(d, trial, m.binning, bins);
      if (err < best - 1e-12 * current) {
        best = err;
        best_feature = f;
      }
    }
    if (!best_feature) break;
    selected.insert(std::upper_bound(selected.begin(), selected.end(), *best_feature), *best_feature);
    current = best;
  }
  m.selected = selected;

  if (!selected.empty()) {
    std::map<DecisionTableModel::Key, std::vector<double>> grouped;
    for (std::size_t r = 0; r < d.size(); ++r) {
      grouped[table_detail::row_key(d, r, selected, m.binning, bins)].push_back(d.target(r));
    }
    for (auto& [key, ys] : grouped) m.cells.emplace(key, numeric::stable_mean(ys));
  }
  return m;
}

}  // namespace smartwsn
