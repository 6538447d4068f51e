#pragma once

#include <span>
#include <vector>

#include "smartwsn/dataset.hpp"
#include "smartwsn/regressors/model_io.hpp"
#include "smartwsn/regressors/numeric.hpp"

namespace smartwsn {

/// Ordinary least squares with intercept over every feature.
struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;

  double predict(std::span<const double> x) const noexcept {
    double y = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) y += coefficients[j] * x[j];
    return y;
  }

  void write(ModelWriter& w) const {
    w.key("intercept").real(intercept);
    w.key("coefficients").reals(coefficients);
  }

  static LinearModel read(ModelReader& r) {
    LinearModel m;
    r.expect("intercept");
    m.intercept = r.real();
    r.expect("coefficients");
    m.coefficients = r.reals();
    return m;
  }
};

/// Singular normal equations fall back to ridge with lambda = 1e-8.
inline LinearModel fit_linear_model(const Dataset& d) {
  d.require_non_empty("linear regression");
  const auto rows = numeric::iota_indices(d.size());
  const auto cols = numeric::iota_indices(d.arity());
  auto fit = numeric::least_squares(d, rows, cols, /*ridge_on_singular=*/true);
  LinearModel m;
  if (fit) {
    m.intercept = fit->intercept;
    m.coefficients = std::move(fit->coefficients);
  } else {
    m.intercept = numeric::stable_mean(d.targets());
    m.coefficients.assign(d.arity(), 0.0);
  }
  return m;
}

}  // namespace smartwsn
