#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "smartwsn/regressors/predictor.hpp"

using namespace smartwsn;

namespace {

Dataset one_feature(const std::vector<double>& xs, const std::vector<double>& ys) {
  Dataset d(1);
  for (std::size_t i = 0; i < xs.size(); ++i) d.add_row({xs[i]}, ys[i]);
  return d;
}

Dataset shuffled(const Dataset& d, std::mt19937_64& rng) {
  auto idx = numeric::iota_indices(d.size());
  std::shuffle(idx.begin(), idx.end(), rng);
  Dataset out(d.feature_names());
  for (auto i : idx) out.add_row(d.row(i), d.target(i));
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::IoError;
}

}  // namespace

// ---- linear regression -------------------------------------------------------

TEST(LinearRegression, PerfectLine) {
  const auto p = fit_linear_regression(one_feature({0, 1, 2}, {1, 3, 5}));
  const auto& m = p.as<LinearModel>();
  EXPECT_NEAR(m.intercept, 1.0, 1e-12);
  EXPECT_NEAR(m.coefficients[0], 2.0, 1e-12);
  const double x = 3.0;
  EXPECT_NEAR(p.predict(std::span<const double>(&x, 1)), 7.0, 1e-12);
}

TEST(LinearRegression, ConstantTargetsGiveZeroSlopes) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10, 10);
  Dataset d(3);
  for (int i = 0; i < 30; ++i) d.add_row({u(rng), u(rng), u(rng)}, 4.2);
  const auto& m = fit_linear_regression(d).as<LinearModel>();
  EXPECT_EQ(m.intercept, 4.2);
  for (double c : m.coefficients) EXPECT_EQ(c, 0.0);
}

TEST(LinearRegression, SingularSystemUsesRidge) {
  // Second feature duplicates the first: the normal matrix is singular.
  Dataset d(2);
  for (int i = 0; i < 10; ++i) d.add_row({double(i), double(i)}, 3.0 * i + 1.0);
  const auto p = fit_linear_regression(d);
  const auto& m = p.as<LinearModel>();
  EXPECT_NEAR(m.coefficients[0], 1.5, 1e-6);
  EXPECT_NEAR(m.coefficients[1], 1.5, 1e-6);
  const std::vector<double> q = {4.0, 4.0};
  EXPECT_NEAR(p.predict(q), 13.0, 1e-6);
}

TEST(LinearRegression, MatchesNormalEquationsOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = oracle::random_dataset(rng, 50, 3);
    const auto expected = oracle::ols_normal_equations(d);
    const auto& m = fit_linear_regression(d).as<LinearModel>();
    ASSERT_NEAR(m.intercept, expected[0], 1e-8);
    for (std::size_t j = 0; j < 3; ++j) ASSERT_NEAR(m.coefficients[j], expected[j + 1], 1e-8);
  }
}

TEST(LinearRegression, EmptyDatasetRejected) {
  EXPECT_EQ(code_of([] { fit_linear_regression(Dataset(2)); }), ErrorCode::EmptyDataset);
}

// ---- decision stump -------------------------------------------------------------

TEST(DecisionStump, PerfectStep) {
  const auto d = one_feature({0, 1, 2, 3}, {0, 0, 10, 10});
  const auto p = fit_decision_stump(d);
  const auto& m = p.as<StumpModel>();
  ASSERT_TRUE(m.feature.has_value());
  EXPECT_EQ(*m.feature, 0u);
  EXPECT_DOUBLE_EQ(m.threshold, 1.5);
  EXPECT_DOUBLE_EQ(m.left, 0.0);
  EXPECT_DOUBLE_EQ(m.right, 10.0);
  EXPECT_DOUBLE_EQ(m.sse, 0.0);
  EXPECT_DOUBLE_EQ(oracle::stump_min_sse(d), 0.0);
  const double x = 4.0;
  EXPECT_DOUBLE_EQ(p.predict(std::span<const double>(&x, 1)), 10.0);
}

TEST(DecisionStump, ConstantTargetIsSingleLeaf) {
  const auto& m = fit_decision_stump(one_feature({0, 1, 2, 3, 4}, {7, 7, 7, 7, 7})).as<StumpModel>();
  EXPECT_FALSE(m.feature.has_value());
  EXPECT_EQ(m.left, 7.0);
}

TEST(DecisionStump, SingleRowIsSingleLeaf) {
  const auto& m = fit_decision_stump(one_feature({3}, {2.5})).as<StumpModel>();
  EXPECT_FALSE(m.feature.has_value());
  EXPECT_EQ(m.left, 2.5);
}

TEST(DecisionStump, SplitSseIsEnumerationMinimum) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = oracle::random_dataset(rng, 2 + rng() % 40, 1 + rng() % 4);
    const auto& m = fit_decision_stump(d).as<StumpModel>();
    const double fitted = m.feature ? oracle::split_sse(d, *m.feature, m.threshold) : oracle::direct_sse(d.targets());
    const double best = oracle::stump_min_sse(d);
    ASSERT_NEAR(fitted, best, 1e-9 * std::max(1.0, best)) << "trial " << trial;
    ASSERT_NEAR(m.sse, fitted, 1e-9 * std::max(1.0, best));
  }
}

TEST(DecisionStump, TieGoesToLowestFeature) {
  // Both features split the targets identically.
  Dataset d(2);
  d.add_row({0, 5}, 1);
  d.add_row({1, 6}, 1);
  d.add_row({2, 7}, 9);
  d.add_row({3, 8}, 9);
  const auto& m = fit_decision_stump(d).as<StumpModel>();
  ASSERT_TRUE(m.feature);
  EXPECT_EQ(*m.feature, 0u);
}

// ---- decision table -------------------------------------------------------------

TEST(DecisionTable, BinaryFeaturePartitionsTargets) {
  // Feature 0 decides the target; feature 1 is noise.
  Dataset d(2);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> noise(0, 1);
  for (int i = 0; i < 20; ++i) d.add_row({double(i % 2), noise(rng)}, i % 2 ? 8.0 : 2.0);
  const auto p = fit_decision_table(d);
  const auto& m = p.as<DecisionTableModel>();
  // Hand check of the LOO criterion: with feature 0 every row's cell-mates
  // share its target, so LOO MSE is 0 against 9.47 for the empty table.
  ASSERT_EQ(m.selected, std::vector<std::size_t>{0});
  const std::vector<double> zero = {0.0, 0.5}, one = {1.0, 0.5};
  EXPECT_EQ(p.predict(zero), 2.0);
  EXPECT_EQ(p.predict(one), 8.0);
}

TEST(DecisionTable, EmptySelectionPredictsGlobalMean) {
  // Pure noise targets: no feature lowers the LOO error.
  Dataset d(1);
  const std::vector<double> ys = {1, 5, 1, 5, 1, 5, 1, 5};
  for (std::size_t i = 0; i < ys.size(); ++i) d.add_row({double(i / 2)}, ys[i]);
  const auto p = fit_decision_table(d);
  const auto& m = p.as<DecisionTableModel>();
  EXPECT_TRUE(m.selected.empty());
  for (double q : {-3.0, 0.0, 2.0, 99.0}) EXPECT_DOUBLE_EQ(p.predict(std::span<const double>(&q, 1)), 3.0);
}

TEST(DecisionTable, EmptyCellFallsBackToGlobalMean) {
  Dataset d(2);
  // Cells (0,0) and (9,9) only.
  for (int i = 0; i < 6; ++i) {
    const double v = i % 2;
    d.add_row({v, v}, v ? 10.0 : 0.0);
  }
  const auto p = fit_decision_table(d);
  const auto& m = p.as<DecisionTableModel>();
  ASSERT_FALSE(m.selected.empty());
  std::vector<double> q = {0.0, 1.0};
  if (m.selected.size() == 2) {
    EXPECT_DOUBLE_EQ(p.predict(q), m.global_mean);
  }
  // A key no training row produced always misses.
  DecisionTableModel copy = m;
  copy.cells.clear();
  EXPECT_DOUBLE_EQ(copy.predict(q), m.global_mean);
}

TEST(DecisionTable, CellPredictionIsCellMean) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> level(0, 2);
  std::normal_distribution<double> noise(0, 0.1);
  Dataset d(1);
  for (int i = 0; i < 60; ++i) {
    const int l = level(rng);
    d.add_row({double(l)}, l * 3.0 + noise(rng));
  }
  const auto p = fit_decision_table(d);
  ASSERT_EQ(p.as<DecisionTableModel>().selected.size(), 1u);
  for (int l = 0; l < 3; ++l) {
    double sum = 0;
    int n = 0;
    for (std::size_t r = 0; r < d.size(); ++r) {
      if (d.feature(r, 0) == l) {
        sum += d.target(r);
        ++n;
      }
    }
    const double q = l;
    EXPECT_NEAR(p.predict(std::span<const double>(&q, 1)), sum / n, 1e-12);
  }
}

// ---- k-NN -----------------------------------------------------------------------

TEST(Knn, ExactMatchWithK1) {
  const auto d = one_feature({0, 1, 2, 3}, {5, 6, 7, 8});
  const auto p = fit_knn(d, 1);
  const double q = 2.0;
  EXPECT_EQ(p.predict(std::span<const double>(&q, 1)), 7.0);
}

TEST(Knn, KEqualsNIsGlobalMean) {
  const auto d = one_feature({0, 1, 2, 3}, {1, 2, 3, 6});
  const auto p = fit_knn(d, 4);
  for (double q : {-100.0, 1.5, 100.0}) EXPECT_DOUBLE_EQ(p.predict(std::span<const double>(&q, 1)), 3.0);
}

TEST(Knn, DistanceTieGoesToLowerRow) {
  const auto d = one_feature({0, 2}, {10, 20});
  const auto p = fit_knn(d, 1);
  const double q = 1.0;
  EXPECT_EQ(p.predict(std::span<const double>(&q, 1)), 10.0);
}

TEST(Knn, MatchesFullScanOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-6, 6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = oracle::random_dataset(rng, 20, 3);
    const auto p = fit_knn(d, 3);
    for (int q = 0; q < 10; ++q) {
      const std::vector<double> query = {u(rng), u(rng), u(rng)};
      const auto ans = oracle::knn_full_scan(d, 3, query);
      ASSERT_EQ(p.as<KnnModel>().neighbors(query), ans.indices);
      // Same neighbours; the means may differ only by summation rounding.
      ASSERT_NEAR(p.predict(query), ans.mean, 1e-12 * std::max(1.0, std::abs(ans.mean)));
    }
  }
}

TEST(Knn, Errors) {
  EXPECT_EQ(code_of([] { fit_knn(Dataset(1), 1); }), ErrorCode::EmptyDataset);
  EXPECT_EQ(code_of([] { fit_knn(one_feature({1, 2}, {1, 2}), 3); }), ErrorCode::KTooLarge);
  EXPECT_EQ(code_of([] { fit_knn(one_feature({1, 2}, {1, 2}), 0); }), ErrorCode::KTooLarge);
}

// ---- M5P -------------------------------------------------------------------------

TEST(M5P, ConstantTargetsSingleLeaf) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 30; ++i) {
    xs.push_back(i);
    ys.push_back(-2.75);
  }
  const auto p = fit_m5p(one_feature(xs, ys));
  const auto& m = p.as<M5Model>();
  EXPECT_EQ(m.nodes.size(), 1u);
  const double q = 12.3;
  EXPECT_EQ(p.predict(std::span<const double>(&q, 1)), -2.75);
}

TEST(M5P, ExactlyLinearDataPrunesToOneLinearLeaf) {
  std::vector<double> xs, ys;
  for (int i = 0; i < 100; ++i) {
    xs.push_back(i * 0.37 - 10.0);
    ys.push_back(2.0 * xs.back() + 1.0);
  }
  const auto d = one_feature(xs, ys);
  const auto p = fit_m5p(d);
  EXPECT_EQ(p.as<M5Model>().nodes.size(), 1u);
  // OLS fits this data exactly, so pruning must end at a single linear leaf.
  for (std::size_t r = 0; r < d.size(); ++r) ASSERT_NEAR(p.predict(d.row(r)), d.target(r), 1e-8);
}

TEST(M5P, TwoClusterRootSplitMaximizesSdr) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-5, 5);
  Dataset d(2);
  for (int i = 0; i < 80; ++i) {
    const double x = u(rng);
    const double z = u(rng);
    d.add_row({x, z}, (x < 0 ? 0.0 : 10.0) + 0.05 * x);
  }
  const auto& m = fit_m5p(d).as<M5Model>();
  const auto root = m.root_split();
  ASSERT_TRUE(root.has_value());
  EXPECT_EQ(root->first, 0u);
  EXPECT_NEAR(root->second, 0.0, 0.3);

  // The chosen split carries the largest SDR among admissible candidates.
  double best = -1.0;
  for (auto [f, t] : oracle::all_midpoints(d)) {
    std::size_t left = 0;
    for (std::size_t r = 0; r < d.size(); ++r) left += d.feature(r, f) < t;
    if (left < kDefaultMinLeaf || d.size() - left < kDefaultMinLeaf) continue;
    best = std::max(best, oracle::sdr(d, f, t));
  }
  EXPECT_NEAR(oracle::sdr(d, root->first, root->second), best, 1e-9);
}

TEST(M5P, LeafModelsEqualDirectOlsOnLeafRows) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int trial = 0; trial < 10; ++trial) {
    Dataset d(2);
    for (int i = 0; i < 120; ++i) {
      const double x = u(rng), z = u(rng);
      d.add_row({x, z}, (x < 1 ? 3 * x : 20 - x) + 0.5 * z + 0.01 * u(rng));
    }
    const auto p = fit_m5p(d);
    const auto& m = p.as<M5Model>();
    std::map<std::size_t, std::vector<std::size_t>> by_leaf;
    for (std::size_t r = 0; r < d.size(); ++r) by_leaf[m.leaf_of(d.row(r))].push_back(r);
    for (const auto& [leaf, rows] : by_leaf) {
      const auto& node = m.nodes[leaf];
      Dataset sub(node.terms.size());
      std::vector<double> x(node.terms.size());
      for (auto r : rows) {
        for (std::size_t j = 0; j < node.terms.size(); ++j) x[j] = d.feature(r, node.terms[j].feature);
        sub.add_row(x, d.target(r));
      }
      if (node.terms.empty()) {
        double mean = 0;
        for (auto r : rows) mean += d.target(r);
        mean /= rows.size();
        ASSERT_NEAR(node.intercept, mean, 1e-9);
        continue;
      }
      const auto beta = oracle::ols_normal_equations(sub);
      ASSERT_NEAR(node.intercept, beta[0], 1e-7);
      for (std::size_t j = 0; j < node.terms.size(); ++j) ASSERT_NEAR(node.terms[j].coefficient, beta[j + 1], 1e-7);
    }
  }
}

TEST(M5P, EveryAcceptedSplitHasPositiveSdr) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = oracle::random_dataset(rng, 60, 3);
    const auto& m = fit_m5p(d).as<M5Model>();
    // Walk the tree carrying each node's rows.
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> stack = {{0, numeric::iota_indices(d.size())}};
    while (!stack.empty()) {
      auto [idx, rows] = stack.back();
      stack.pop_back();
      const auto& node = m.nodes[idx];
      if (node.leaf) continue;
      Dataset sub(d.arity());
      std::vector<std::size_t> l, r;
      for (auto row : rows) {
        sub.add_row(d.row(row), d.target(row));
        (d.feature(row, node.feature) < node.threshold ? l : r).push_back(row);
      }
      ASSERT_GT(oracle::sdr(sub, node.feature, node.threshold), 0.0);
      stack.push_back({static_cast<std::size_t>(node.left), l});
      stack.push_back({static_cast<std::size_t>(node.right), r});
    }
  }
}

// ---- common contract ----------------------------------------------------------------

TEST(Predictor, ConstantTargetsPredictConstantEverywhere) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-50, 50);
  for (Algorithm a : kAllAlgorithms) {
    Dataset d(4);
    for (int i = 0; i < 40; ++i) d.add_row({u(rng), u(rng), u(rng), u(rng)}, 0.1);
    const auto p = fit_predictor(a, d);
    for (int q = 0; q < 100; ++q) {
      const std::vector<double> x = {u(rng), u(rng), u(rng), u(rng)};
      ASSERT_EQ(p.predict(x), 0.1) << algorithm_name(a);
    }
  }
}

TEST(Predictor, ArityMismatchRejected) {
  const auto p = fit_decision_stump(one_feature({0, 1}, {0, 1}));
  const std::vector<double> two = {1, 2};
  EXPECT_EQ(code_of([&] { p.predict(two); }), ErrorCode::ArityMismatch);
}

TEST(Predictor, DeterministicAndPermutationInvariant) {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(-5, 5);
  const auto d = oracle::random_dataset(rng, 80, 3);
  auto s = shuffled(d, rng);
  for (Algorithm a : {Algorithm::LinearRegression, Algorithm::DecisionStump, Algorithm::M5P}) {
    const auto p1 = fit_predictor(a, d);
    const auto p2 = fit_predictor(a, s);
    for (int q = 0; q < 50; ++q) {
      const std::vector<double> x = {u(rng), u(rng), u(rng)};
      ASSERT_EQ(p1.predict(x), p1.predict(x));
      ASSERT_NEAR(p1.predict(x), p2.predict(x), 1e-9) << algorithm_name(a);
    }
  }
}

TEST(Predictor, SerializationRoundTripIsBitIdentical) {
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(-5, 5);
  const auto d = oracle::random_dataset(rng, 60, 3);
  for (Algorithm a : kAllAlgorithms) {
    const auto p = fit_predictor(a, d, {.knn_k = 3});
    const auto text = p.to_string();
    const auto q = Predictor::from_string(text);
    EXPECT_EQ(q.algorithm(), a);
    EXPECT_EQ(q.arity(), 3u);
    EXPECT_EQ(q.to_string(), text);
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> x = {u(rng), u(rng), u(rng)};
      ASSERT_EQ(p.predict(x), q.predict(x)) << algorithm_name(a);
    }
  }
}

TEST(Predictor, MalformedModelNamesLine) {
  const std::string text = "smartwsn-model 1\nalgorithm DecisionStump\narity 1\nsplit 0 oops 1 2\n";
  try {
    Predictor::from_string(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(Predictor, AlgorithmListParsing) {
  EXPECT_EQ(parse_algorithm_list("all").size(), 5u);
  EXPECT_EQ(parse_algorithm_list("stump,knn"), (std::vector<Algorithm>{Algorithm::DecisionStump, Algorithm::KNN}));
  EXPECT_EQ(code_of([] { parse_algorithm_list("stump,svm"); }), ErrorCode::UnknownAlgorithm);
}
