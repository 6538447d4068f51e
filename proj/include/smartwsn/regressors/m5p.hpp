#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/numeric.hpp"
#include "smartwsn/regressors/stump.hpp"

namespace smartwsn {

inline constexpr std::size_t kDefaultMinLeaf = 4;

/// M5 model tree without smoothing.
///
/// Growing: split on the feature/midpoint with the largest standard deviation
/// reduction, SDR = sd(T) - sum_i |T_i|/|T| * sd(T_i), each side keeping at
/// least min_leaf rows. A node stops when it has fewer than 2 * min_leaf rows
/// or its sd is below 5% of the root sd.
///
/// Pruning (bottom-up): each internal node fits least squares over the
/// features tested anywhere in its subtree. Errors are mean absolute error
/// scaled by (n + p) / (n - p), p = model parameters. The subtree collapses
/// into a leaf holding that model whenever the model is not worse than the
/// size-weighted error of the children.
struct M5Model {
  struct Term {
    std::size_t feature = 0;
    double coefficient = 0.0;
  };

  struct Node {
    bool leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int64_t left = -1;
    std::int64_t right = -1;
    double intercept = 0.0;   // leaf model
    std::vector<Term> terms;  // leaf model, ascending feature
  };

  std::vector<Node> nodes;  // nodes[0] is the root

  std::size_t leaf_of(std::span<const double> x) const noexcept {
    std::size_t i = 0;
    while (!nodes[i].leaf) {
      i = static_cast<std::size_t>(x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right);
    }
    return i;
  }

  double predict(std::span<const double> x) const noexcept {
    const Node& leaf = nodes[leaf_of(x)];
    double y = leaf.intercept;
    for (const auto& t : leaf.terms) y += t.coefficient * x[t.feature];
    return y;
  }

  std::optional<std::pair<std::size_t, double>> root_split() const {
    if (nodes.empty() || nodes[0].leaf) return std::nullopt;
    return std::make_pair(nodes[0].feature, nodes[0].threshold);
  }

  std::size_t leaf_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.leaf; }));
  }

  void write(ModelWriter& w) const {
    w.key("nodes").integer(static_cast<std::int64_t>(nodes.size()));
    for (const auto& n : nodes) {
      if (n.leaf) {
        w.key("leaf").real(n.intercept).integer(static_cast<std::int64_t>(n.terms.size()));
        for (const auto& t : n.terms) w.integer(static_cast<std::int64_t>(t.feature)).real(t.coefficient);
      } else {
        w.key("split").integer(static_cast<std::int64_t>(n.feature)).real(n.threshold).integer(n.left).integer(n.right);
      }
    }
  }

  static M5Model read(ModelReader& r) {
    M5Model m;
    r.expect("nodes");
    m.nodes.resize(r.count());
    if (m.nodes.empty()) r.fail("tree has no nodes");
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
      Node& n = m.nodes[i];
      auto kind = r.token();
      if (kind == "leaf") {
        n.leaf = true;
        n.intercept = r.real();
        n.terms.resize(r.count());
        for (auto& t : n.terms) {
          t.feature = r.count();
          t.coefficient = r.real();
        }
      } else if (kind == "split") {
        n.leaf = false;
        n.feature = r.count();
        n.threshold = r.real();
        n.left = r.integer();
        n.right = r.integer();
        const auto size = static_cast<std::int64_t>(m.nodes.size());
        if (n.left <= static_cast<std::int64_t>(i) || n.right <= static_cast<std::int64_t>(i) ||
            n.left >= size || n.right >= size) {
          r.fail("child index out of range");
        }
      } else {
        r.fail("expected 'leaf' or 'split'");
      }
    }
    return m;
  }
};

namespace m5_detail {

struct Builder {
  const Dataset& d;
  std::size_t min_leaf;
  double root_sd = 0.0;
  M5Model model;

  double target_sd(const std::vector<std::size_t>& rows) const {
    std::vector<double> ys(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) ys[i] = d.target(rows[i]);
    return numeric::population_sd(ys);
  }

  std::size_t make_mean_leaf(const std::vector<std::size_t>& rows) {
    M5Model::Node n;
    n.intercept = numeric::stable_mean(rows, [&](std::size_t r) { return d.target(r); });
    model.nodes.push_back(std::move(n));
    return model.nodes.size() - 1;
  }

  std::size_t grow(const std::vector<std::size_t>& rows) {
    const double sd = target_sd(rows);
    if (rows.size() < 2 * min_leaf || !(sd > 0.0) || sd < 0.05 * root_sd) return make_mean_leaf(rows);

    const std::size_t n = rows.size();
    const double mean = numeric::stable_mean(rows, [&](std::size_t r) { return d.target(r); });
    double best_sdr = 1e-12 * sd;
    std::optional<std::size_t> best_feature;
    double best_threshold = 0.0;

    std::vector<std::size_t> order;
    std::vector<double> s(n + 1), q(n + 1);
    auto side_sd = [](double sum, double sq, double cnt) {
      const double var = sq / cnt - (sum / cnt) * (sum / cnt);
      return var > 0.0 ? std::sqrt(var) : 0.0;
    };
    for (std::size_t f = 0; f < d.arity(); ++f) {
      order = rows;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return d.feature(a, f) < d.feature(b, f); });
      for (std::size_t i = 0; i < n; ++i) {
        const double y = d.target(order[i]) - mean;
        s[i + 1] = s[i] + y;
        q[i + 1] = q[i] + y * y;
      }
      for (std::size_t i = min_leaf - 1; i + min_leaf < n; ++i) {
        const double lo = d.feature(order[i], f);
        const double hi = d.feature(order[i + 1], f);
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n - i - 1);
        const double sdr = sd - (nl / n) * side_sd(s[i + 1], q[i + 1], nl) -
                           (nr / n) * side_sd(s[n] - s[i + 1], q[n] - q[i + 1], nr);
        if (sdr > best_sdr) {
          best_sdr = sdr;
          best_feature = f;
          best_threshold = split_midpoint(lo, hi);
        }
      }
    }
    if (!best_feature) return make_mean_leaf(rows);

    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (d.feature(r, *best_feature) < best_threshold ? left_rows : right_rows).push_back(r);
    }
    M5Model::Node split;
    split.leaf = false;
    split.feature = *best_feature;
    split.threshold = best_threshold;
    model.nodes.push_back(split);
    const std::size_t self = model.nodes.size() - 1;
    const auto l = grow(left_rows);
    const auto r = grow(right_rows);
    model.nodes[self].left = static_cast<std::int64_t>(l);
    model.nodes[self].right = static_cast<std::int64_t>(r);
    return self;
  }

  static double complexity_factor(std::size_t n, std::size_t p) {
    if (n <= p) return 10.0;
    return static_cast<double>(n + p) / static_cast<double>(n - p);
  }

  double model_mae(const std::vector<std::size_t>& rows, double intercept,
                   const std::vector<M5Model::Term>& terms) const {
    double acc = 0.0;
    for (std::size_t r : rows) {
      double y = intercept;
      for (const auto& t : terms) y += t.coefficient * d.feature(r, t.feature);
      acc += std::abs(y - d.target(r));
    }
    return rows.empty() ? 0.0 : acc / static_cast<double>(rows.size());
  }

  struct Pruned {
    double error = 0.0;
    std::set<std::size_t> used;
  };

  Pruned prune(std::size_t idx, const std::vector<std::size_t>& rows) {
    M5Model::Node& node = model.nodes[idx];
    if (node.leaf) {
      const double err = model_mae(rows, node.intercept, node.terms) *
                         complexity_factor(rows.size(), node.terms.size() + 1);
      return {err, {}};
    }
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      (d.feature(r, node.feature) < node.threshold ? left_rows : right_rows).push_back(r);
    }
    const auto left_idx = static_cast<std::size_t>(node.left);
    const auto right_idx = static_cast<std::size_t>(node.right);
    const std::size_t feature = node.feature;
    Pruned lp = prune(left_idx, left_rows);
    Pruned rp = prune(right_idx, right_rows);

    Pruned out;
    out.used = std::move(lp.used);
    out.used.insert(rp.used.begin(), rp.used.end());
    out.used.insert(feature);
    const double subtree_err =
        (static_cast<double>(left_rows.size()) * lp.error + static_cast<double>(right_rows.size()) * rp.error) /
        static_cast<double>(rows.size());

    const std::vector<std::size_t> features(out.used.begin(), out.used.end());
    double intercept = 0.0;
    std::vector<M5Model::Term> terms;
    if (auto fit = numeric::least_squares(d, rows, features, /*ridge_on_singular=*/false)) {
      intercept = fit->intercept;
      for (std::size_t j = 0; j < features.size(); ++j) terms.push_back({features[j], fit->coefficients[j]});
    } else {
      intercept = numeric::stable_mean(rows, [&](std::size_t r) { return d.target(r); });
    }
    const double node_err = model_mae(rows, intercept, terms) * complexity_factor(rows.size(), terms.size() + 1);

    // Errors equal up to rounding noise count as "not worse".
    if (node_err <= subtree_err + 1e-10 * root_sd) {
      M5Model::Node& self = model.nodes[idx];
      self.leaf = true;
      self.left = self.right = -1;
      self.intercept = intercept;
      self.terms = std::move(terms);
      out.error = node_err;
    } else {
      out.error = subtree_err;
    }
    return out;
  }
};

/// Drops nodes orphaned by pruning and renumbers children in preorder.
inline M5Model compact(const M5Model& in) {
  M5Model out;
  auto copy = [&](auto&& self, std::size_t idx) -> std::size_t {
    const auto& n = in.nodes[idx];
    out.nodes.push_back(n);
    const std::size_t at = out.nodes.size() - 1;
    if (!n.leaf) {
      const auto l = self(self, static_cast<std::size_t>(n.left));
      const auto r = self(self, static_cast<std::size_t>(n.right));
      out.nodes[at].left = static_cast<std::int64_t>(l);
      out.nodes[at].right = static_cast<std::int64_t>(r);
    }
    return at;
  };
  copy(copy, 0);
  return out;
}

}  // namespace m5_detail

inline M5Model fit_m5_model(const Dataset& d, std::size_t min_leaf = kDefaultMinLeaf) {
  d.require_non_empty("M5P");
  if (min_leaf == 0) throw Error(ErrorCode::InvalidConfig, "M5P min_leaf must be positive");
  m5_detail::Builder b{d, min_leaf};
  const auto rows = numeric::iota_indices(d.size());
  b.root_sd = b.target_sd(rows);
  b.grow(rows);
  b.prune(0, rows);
  return m5_detail::compact(b.model);
}

}  // namespace smartwsn
