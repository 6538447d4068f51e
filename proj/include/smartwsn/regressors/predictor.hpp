#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/decision_table.hpp"
#include "smartwsn/regressors/knn.hpp"
#include "smartwsn/regressors/linear.hpp"
#include "smartwsn/regressors/m5p.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/stump.hpp"

namespace smartwsn {

enum class Algorithm { LinearRegression, DecisionStump, DecisionTable, KNN, M5P };

inline constexpr std::array<Algorithm, 5> kAllAlgorithms = {
    Algorithm::LinearRegression, Algorithm::DecisionStump, Algorithm::DecisionTable, Algorithm::KNN,
    Algorithm::M5P};

constexpr std::string_view algorithm_name(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::LinearRegression: return "LinearRegression";
    case Algorithm::DecisionStump: return "DecisionStump";
    case Algorithm::DecisionTable: return "DecisionTable";
    case Algorithm::KNN: return "KNN";
    case Algorithm::M5P: return "M5P";
  }
  return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "linearregression" || lower == "linear" || lower == "lr") return Algorithm::LinearRegression;
  if (lower == "decisionstump" || lower == "stump") return Algorithm::DecisionStump;
  if (lower == "decisiontable" || lower == "table") return Algorithm::DecisionTable;
  if (lower == "knn" || lower == "ibk" || lower == "k-nn") return Algorithm::KNN;
  if (lower == "m5p" || lower == "m5") return Algorithm::M5P;
  return std::nullopt;
}

inline constexpr std::string_view kAlgorithmChoices = "linear, stump, table, knn, m5p (or all)";

/// Comma-separated algorithm list; "all" expands to the five families.
inline std::vector<Algorithm> parse_algorithm_list(std::string_view text) {
  std::vector<Algorithm> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = text.substr(start, end - start);
    if (item == "all") {
      out.assign(kAllAlgorithms.begin(), kAllAlgorithms.end());
    } else if (auto a = parse_algorithm(item)) {
      if (std::find(out.begin(), out.end(), *a) == out.end()) out.push_back(*a);
    } else {
      throw Error(ErrorCode::UnknownAlgorithm,
                  "'" + std::string(item) + "'; valid: " + std::string(kAlgorithmChoices));
    }
    start = end + 1;
  }
  return out;
}

struct RegressorOptions {
  std::size_t knn_k = kDefaultK;
  std::size_t table_bins = kDefaultTableBins;
  std::size_t m5_min_leaf = kDefaultMinLeaf;
};

inline constexpr std::string_view kModelMagic = "smartwsn-model";
inline constexpr int kModelFormatVersion = 1;

/// A fitted, immutable regression model of one of the five families.
class Predictor {
 public:
  using Model = std::variant<LinearModel, StumpModel, DecisionTableModel, KnnModel, M5Model>;

  Predictor(Algorithm algorithm, std::size_t arity, Model model)
      : algorithm_(algorithm), arity_(arity), model_(std::move(model)) {}

  Algorithm algorithm() const noexcept { return algorithm_; }
  std::size_t arity() const noexcept { return arity_; }
  const Model& model() const noexcept { return model_; }

  template <typename T>
  const T& as() const& {
    return std::get<T>(model_);
  }
  template <typename T>
  T as() && {
    return std::get<T>(std::move(model_));
  }

  double predict(std::span<const double> features) const {
    if (features.size() != arity_) {
      throw Error(ErrorCode::ArityMismatch, "predictor expects " + std::to_string(arity_) +
                                                " features, got " + std::to_string(features.size()));
    }
    return std::visit([&](const auto& m) { return m.predict(features); }, model_);
  }

  void write(std::ostream& out) const {
    ModelWriter w(out);
    w.key(kModelMagic).integer(kModelFormatVersion);
    w.key("algorithm").word(algorithm_name(algorithm_));
    w.key("arity").integer(static_cast<std::int64_t>(arity_));
    std::visit([&](const auto& m) { m.write(w); }, model_);
    w.key("end");
    w.finish();
  }

  static Predictor read(std::istream& in) {
    ModelReader r(in);
    r.expect(kModelMagic);
    if (r.integer() != kModelFormatVersion) r.fail("unsupported model format version");
    r.expect("algorithm");
    auto tag = parse_algorithm(r.token());
    if (!tag) r.fail("unknown algorithm");
    r.expect("arity");
    const std::size_t arity = r.count();
    Model model = [&]() -> Model {
      switch (*tag) {
        case Algorithm::LinearRegression: return LinearModel::read(r);
        case Algorithm::DecisionStump: return StumpModel::read(r);
        case Algorithm::DecisionTable: return DecisionTableModel::read(r);
        case Algorithm::KNN: return KnnModel::read(r);
        case Algorithm::M5P: return M5Model::read(r);
      }
      r.fail("unknown algorithm");
    }();
    r.expect("end");
    return Predictor(*tag, arity, std::move(model));
  }

  std::string to_string() const {
    std::ostringstream ss;
    write(ss);
    return ss.str();
  }

  static Predictor from_string(const std::string& text) {
    std::istringstream ss(text);
    return read(ss);
  }

 private:
  Algorithm algorithm_;
  std::size_t arity_;
  Model model_;
};

inline Predictor fit_predictor(Algorithm algorithm, const Dataset& d, const RegressorOptions& opt = {}) {
  switch (algorithm) {
    case Algorithm::LinearRegression: return Predictor(algorithm, d.arity(), fit_linear_model(d));
    case Algorithm::DecisionStump: return Predictor(algorithm, d.arity(), fit_stump_model(d));
    case Algorithm::DecisionTable:
      return Predictor(algorithm, d.arity(), fit_decision_table_model(d, opt.table_bins));
    case Algorithm::KNN: return Predictor(algorithm, d.arity(), fit_knn_model(d, opt.knn_k));
    case Algorithm::M5P: return Predictor(algorithm, d.arity(), fit_m5_model(d, opt.m5_min_leaf));
  }
  throw Error(ErrorCode::UnknownAlgorithm, "unhandled algorithm tag");
}

// Named entry points, one per family.
inline Predictor fit_linear_regression(const Dataset& d) { return fit_predictor(Algorithm::LinearRegression, d); }
inline Predictor fit_decision_stump(const Dataset& d) { return fit_predictor(Algorithm::DecisionStump, d); }
inline Predictor fit_decision_table(const Dataset& d, std::size_t bins = kDefaultTableBins) {
  return fit_predictor(Algorithm::DecisionTable, d, {.table_bins = bins});
}
inline Predictor fit_knn(const Dataset& d, std::size_t k = kDefaultK) {
  return fit_predictor(Algorithm::KNN, d, {.knn_k = k});
}
inline Predictor fit_m5p(const Dataset& d, std::size_t min_leaf = kDefaultMinLeaf) {
  return fit_predictor(Algorithm::M5P, d, {.m5_min_leaf = min_leaf});
}

struct FitReport {
  double fit_duration_s = 0.0;
  std::size_t training_rows = 0;
};

inline std::pair<Predictor, FitReport> fit_timed(Algorithm algorithm, const Dataset& d,
                                                 const RegressorOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  Predictor p = fit_predictor(algorithm, d, opt);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  return {std::move(p), FitReport{elapsed.count(), d.size()}};
}

inline void save_predictor(const Predictor& p, const std::filesystem::path& path) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
    p.write(out);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot replace " + path.string() + ": " + ec.message());
}

inline Predictor load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  try {
    return Predictor::read(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace smartwsn
