#pragma once

#include <span>
#include <vector>

#include "wq/matrix.hpp"

namespace wq {

struct ElasticNetConfig {
  double lambda = 0.0;  // overall penalty strength
  double alpha = 1.0;   // 1 = lasso, 0 = ridge
  double tol = 1e-7;    // on max |coefficient change| per sweep
  int max_iter = 10000;
  bool standardize_internally = true;

  void validate() const;
};

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> coefficients;
  ElasticNetConfig config;
  int sweeps_used = 0;
  // Penalized objective after each sweep, in the solver's working scale.
  std::vector<double> objective_trace;
};

// Minimizes  sum (y - b0 - x'b)^2 / (2n) + lambda (1-alpha)/2 |b|^2 + lambda alpha |b|_1
// by cyclic coordinate descent with covariance updates. The intercept is not penalized.
LinearModel fit_elastic_net(const Matrix& X, std::span<const double> y, const ElasticNetConfig& cfg);

std::vector<double> predict_linear(const LinearModel& model, const Matrix& X);

double soft_threshold(double z, double gamma);

}  // namespace wq
