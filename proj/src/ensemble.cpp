#include "wq/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wq/error.hpp"

namespace wq {

double predict_ensemble_row(const Ensemble& model, std::span<const double> x) {
  if (model.kind == EnsembleKind::GBDT) {
    double s = model.base_score;
    for (const auto& t : model.trees) s += model.learning_rate * t.predict(x);
    return s;
  }
  if (model.trees.empty()) throw ModelError("random forest has no trees");
  double s = 0.0;
  for (const auto& t : model.trees) s += t.predict(x);
  return s / static_cast<double>(model.trees.size());
}

std::vector<double> predict_ensemble(const Ensemble& model, const Matrix& X) {
  if (X.cols() != model.n_features)
    throw ModelError("ensemble expects " + std::to_string(model.n_features) + " columns, got " +
                     std::to_string(X.cols()));
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_ensemble_row(model, X.row(i));
  return out;
}

namespace {

void check_inputs(const Matrix& X, std::span<const double> y, const char* who) {
  if (X.rows() == 0) throw ModelError(std::string(who) + ": zero training rows");
  if (y.size() != X.rows()) throw ModelError(std::string(who) + ": X and y row counts differ");
  for (double v : X.data())
    if (!std::isfinite(v)) throw ModelError(std::string(who) + ": non-finite value in X");
  for (double v : y)
    if (!std::isfinite(v)) throw ModelError(std::string(who) + ": non-finite value in y");
}

std::size_t ceil_count(double rate, std::size_t n) {
  // Guard against 0.3 * 10 = 3.0000000000000004 rounding up to 4.
  const double raw = rate * static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
}

}  // namespace

void RFConfig::validate(std::size_t n_features) const {
  if (n_trees < 1) throw ConfigError("random forest needs n_trees >= 1");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (max_features < 0 || static_cast<std::size_t>(max_features) > n_features)
    throw ConfigError("max_features must be <= number of features (" + std::to_string(n_features) + ")");
}

Ensemble fit_random_forest(const Matrix& X, std::span<const double> y, const RFConfig& cfg, Execution exec) {
  check_inputs(X, y, "random forest");
  cfg.validate(X.cols());
  const std::size_t n = X.rows();
  const BinnedData data(X, cfg.n_bins);
  TreeParams tp;
  tp.max_depth = cfg.max_depth;
  tp.min_child_weight = static_cast<double>(cfg.min_samples_leaf);
  tp.reg_lambda = 0.0;
  tp.gamma = 0.0;
  tp.n_bins = cfg.n_bins;
  tp.method = cfg.method;
  tp.max_features = cfg.max_features;

  Ensemble model;
  model.kind = EnsembleKind::RandomForest;
  model.n_features = X.cols();
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  const std::uint64_t forest_seed = derive_seed(cfg.seed, "bootstrap");

#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel && cfg.n_trees > 1)
  for (int t = 0; t < cfg.n_trees; ++t) {
    Rng rng(derive_seed(forest_seed, static_cast<std::uint64_t>(t)));
    std::vector<GradientPair> gh(n);
    std::vector<std::size_t> rows;
    if (cfg.bootstrap) {
      std::vector<double> counts(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) counts[rng.uniform_index(n)] += 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[i] == 0.0) continue;
        gh[i] = {-y[i] * counts[i], counts[i]};
        rows.push_back(i);
      }
    } else {
      rows.resize(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      for (std::size_t i = 0; i < n; ++i) gh[i] = {-y[i], 1.0};
    }
    model.trees[static_cast<std::size_t>(t)] = grow_tree(data, gh, std::move(rows), tp, &rng, exec);
  }
  return model;
}

void GBDTConfig::validate() const {
  if (n_trees < 0) throw ConfigError("n_trees must be >= 0");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("learning_rate must be in (0, 1]");
  if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be >= 0");
  if (!(reg_lambda >= 0.0)) throw ConfigError("reg_lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (goss) {
    const double a = goss->top_rate, b = goss->other_rate;
    if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0 && a + b <= 1.0 + 1e-12))
      throw ConfigError("GOSS rates need a, b in [0, 1] and a + b <= 1");
  }
}

GossSample goss_sample(std::span<const double> abs_gradients, double top_rate, double other_rate, Rng& rng) {
  const std::size_t n = abs_gradients.size();
  if (n == 0) throw ModelError("GOSS on zero rows");
  if (!(top_rate >= 0.0 && top_rate <= 1.0 && other_rate >= 0.0 && other_rate <= 1.0 &&
        top_rate + other_rate <= 1.0 + 1e-12))
    throw ConfigError("GOSS rates need a, b in [0, 1] and a + b <= 1");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return abs_gradients[i] > abs_gradients[j]; });
  const std::size_t top_k = std::min(n, ceil_count(top_rate, n));

  std::vector<std::pair<std::size_t, double>> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < top_k; ++i) picked.emplace_back(order[i], 1.0);

  std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(top_k), order.end());
  std::sort(rest.begin(), rest.end());
  if (other_rate > 0.0 && !rest.empty()) {
    const std::size_t other_k = std::min(rest.size(), ceil_count(other_rate, n));
    const double w = (1.0 - top_rate) / other_rate;
    for (auto i : rng.sample_without_replacement(rest.size(), other_k)) picked.emplace_back(rest[i], w);
  }
  std::sort(picked.begin(), picked.end());
  GossSample s;
  for (const auto& [row, w] : picked) {
    s.rows.push_back(row);
    s.weights.push_back(w);
  }
  return s;
}

namespace {

double rmse_of(std::span<const double> y, std::span<const double> pred) {
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - pred[i]) * (y[i] - pred[i]);
  return std::sqrt(ss / static_cast<double>(y.size()));
}

}  // namespace

Ensemble fit_gbdt(const Matrix& X, std::span<const double> y, const GBDTConfig& cfg, GbdtTrace* trace,
                  Execution exec) {
  check_inputs(X, y, "gradient boosting");
  cfg.validate();
  const std::size_t n = X.rows();

  Ensemble model;
  model.kind = EnsembleKind::GBDT;
  model.learning_rate = cfg.learning_rate;
  model.n_features = X.cols();
  double sum = 0.0;
  for (double v : y) sum += v;
  model.base_score = sum / static_cast<double>(n);

  std::vector<double> pred(n, model.base_score);
  if (trace) trace->train_rmse = {rmse_of(y, pred)};

  const BinnedData data(X, cfg.n_bins);
  TreeParams tp;
  tp.max_depth = cfg.max_depth;
  tp.min_child_weight = cfg.min_child_weight;
  tp.reg_lambda = cfg.reg_lambda;
  tp.gamma = cfg.gamma;
  tp.n_bins = cfg.n_bins;
  tp.method = cfg.method;

  Rng goss_rng(derive_seed(cfg.seed, "goss"));
  std::vector<GradientPair> gh(n);
  std::vector<double> abs_g(n);
  for (int t = 0; t < cfg.n_trees; ++t) {
    for (std::size_t i = 0; i < n; ++i) gh[i] = {pred[i] - y[i], 1.0};
    std::vector<std::size_t> rows;
    if (cfg.goss) {
      for (std::size_t i = 0; i < n; ++i) abs_g[i] = std::abs(gh[i].g);
      GossSample s = goss_sample(abs_g, cfg.goss->top_rate, cfg.goss->other_rate, goss_rng);
      for (std::size_t k = 0; k < s.rows.size(); ++k) {
        auto& p = gh[s.rows[k]];
        p = {p.g * s.weights[k], p.h * s.weights[k]};
      }
      rows = std::move(s.rows);
    } else {
      rows.resize(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    RegressionTree tree = grow_tree(data, gh, std::move(rows), tp, nullptr, exec);
    for (std::size_t i = 0; i < n; ++i) pred[i] += cfg.learning_rate * tree.predict(X.row(i));
    model.trees.push_back(std::move(tree));
    if (trace) trace->train_rmse.push_back(rmse_of(y, pred));
  }
  return model;
}

}  // namespace wq
