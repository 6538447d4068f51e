#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smartwsn/error.hpp"

namespace smartwsn {

/// Rows of (feature vector, target) with a fixed arity. Row-major storage.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<std::string> feature_names)
      : feature_names_(std::move(feature_names)), arity_(feature_names_.size()) {}
  explicit Dataset(std::size_t arity) : arity_(arity) {
    for (std::size_t i = 0; i < arity; ++i) feature_names_.push_back("x" + std::to_string(i));
  }

  void add_row(std::span<const double> features, double target) {
    if (features.size() != arity_) {
      throw Error(ErrorCode::ArityMismatch, "row has " + std::to_string(features.size()) +
                                                " features, dataset arity is " +
                                                std::to_string(arity_));
    }
    features_.insert(features_.end(), features.begin(), features.end());
    targets_.push_back(target);
  }

  void add_row(std::initializer_list<double> features, double target) {
    add_row(std::span<const double>(features.begin(), features.size()), target);
  }

  std::size_t size() const noexcept { return targets_.size(); }
  bool empty() const noexcept { return targets_.empty(); }
  std::size_t arity() const noexcept { return arity_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {features_.data() + i * arity_, arity_};
  }
  double feature(std::size_t row, std::size_t col) const noexcept {
    return features_[row * arity_ + col];
  }
  double target(std::size_t i) const noexcept { return targets_[i]; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  /// Rows [begin, end) as a new dataset.
  Dataset slice(std::size_t begin, std::size_t end) const {
    Dataset out(feature_names_);
    for (std::size_t i = begin; i < end && i < size(); ++i) out.add_row(row(i), target(i));
    return out;
  }

  void require_non_empty(std::string_view who) const {
    if (empty()) throw Error(ErrorCode::EmptyDataset, std::string(who) + " needs at least one row");
  }

 private:
  std::vector<std::string> feature_names_;
  std::size_t arity_ = 0;
  std::vector<double> features_;
  std::vector<double> targets_;
};

}  // namespace smartwsn
