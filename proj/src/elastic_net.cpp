#include "wq/elastic_net.hpp"

#include <cmath>
#include <string>

#include "wq/error.hpp"

namespace wq {

void ElasticNetConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("elastic net lambda must be >= 0");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("elastic net alpha must be in [0, 1]");
  if (!(tol > 0.0)) throw ConfigError("elastic net tol must be > 0");
  if (max_iter < 1) throw ConfigError("elastic net max_iter must be >= 1");
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

LinearModel fit_elastic_net(const Matrix& X, std::span<const double> y, const ElasticNetConfig& cfg) {
  cfg.validate();
  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  if (n == 0) throw ModelError("elastic net: zero training rows");
  if (y.size() != n) throw ModelError("elastic net: X has " + std::to_string(n) + " rows, y has " + std::to_string(y.size()));
  for (double v : X.data())
    if (!std::isfinite(v)) throw ModelError("elastic net: non-finite value in X");
  for (double v : y)
    if (!std::isfinite(v)) throw ModelError("elastic net: non-finite value in y");

  const double nd = static_cast<double>(n);
  std::vector<double> mean(p, 0.0), scale(p, 1.0);
  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y_mean += y[i];
    for (std::size_t j = 0; j < p; ++j) mean[j] += X(i, j);
  }
  y_mean /= nd;
  for (auto& m : mean) m /= nd;
  std::vector<bool> constant(p, false);
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    bool same = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = X(i, j) - mean[j];
      ss += d * d;
      same = same && X(i, j) == X(0, j);
    }
    constant[j] = same;
    if (cfg.standardize_internally && !same) scale[j] = std::sqrt(ss / nd);
  }

  // Working predictors z_j = (x_j - mean_j) / scale_j. Gram and z'y in that scale.
  std::vector<double> gram(p * p, 0.0), zty(p, 0.0);
  std::vector<double> z(p);
  double yty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yc = y[i] - y_mean;
    yty += yc * yc;
    for (std::size_t j = 0; j < p; ++j) z[j] = (X(i, j) - mean[j]) / scale[j];
    for (std::size_t j = 0; j < p; ++j) {
      zty[j] += z[j] * yc;
      for (std::size_t k = j; k < p; ++k) gram[j * p + k] += z[j] * z[k];
    }
  }
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < j; ++k) gram[j * p + k] = gram[k * p + j];

  const double l1 = cfg.lambda * cfg.alpha;
  const double l2 = cfg.lambda * (1.0 - cfg.alpha);
  std::vector<double> beta(p, 0.0);
  // c_j = z_j' r / n, kept current as coefficients move.
  std::vector<double> c(p);
  for (std::size_t j = 0; j < p; ++j) c[j] = zty[j] / nd;

  auto objective = [&] {
    double quad = 0.0, lin = 0.0, pen1 = 0.0, pen2 = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      lin += beta[j] * zty[j];
      pen1 += std::abs(beta[j]);
      pen2 += beta[j] * beta[j];
      double gb = 0.0;
      for (std::size_t k = 0; k < p; ++k) gb += gram[j * p + k] * beta[k];
      quad += beta[j] * gb;
    }
    return (yty - 2.0 * lin + quad) / (2.0 * nd) + 0.5 * l2 * pen2 + l1 * pen1;
  };

  LinearModel model;
  model.config = cfg;
  model.objective_trace.push_back(objective());
  int sweep = 0;
  while (sweep < cfg.max_iter) {
    ++sweep;
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (constant[j]) continue;
      const double gjj = gram[j * p + j] / nd;
      const double old = beta[j];
      const double updated = soft_threshold(c[j] + gjj * old, l1) / (gjj + l2);
      const double delta = updated - old;
      if (delta == 0.0) continue;
      beta[j] = updated;
      for (std::size_t k = 0; k < p; ++k) c[k] -= gram[k * p + j] * delta / nd;
      max_delta = std::max(max_delta, std::abs(delta));
    }
    model.objective_trace.push_back(objective());
    if (max_delta < cfg.tol) break;
  }
  model.sweeps_used = sweep;

  model.coefficients.assign(p, 0.0);
  double intercept = y_mean;
  for (std::size_t j = 0; j < p; ++j) {
    model.coefficients[j] = beta[j] / scale[j];
    intercept -= model.coefficients[j] * mean[j];
  }
  model.intercept = intercept;
  return model;
}

std::vector<double> predict_linear(const LinearModel& model, const Matrix& X) {
  if (X.cols() != model.coefficients.size())
    throw ModelError("linear model expects " + std::to_string(model.coefficients.size()) +
                     " columns, got " + std::to_string(X.cols()));
  std::vector<double> out(X.rows(), model.intercept);
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j) out[i] += model.coefficients[j] * X(i, j);
  return out;
}

}  // namespace wq
