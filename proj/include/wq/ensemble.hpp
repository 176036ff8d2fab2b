#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wq/matrix.hpp"
#include "wq/parallel.hpp"
#include "wq/random.hpp"
#include "wq/tree.hpp"

namespace wq {

enum class EnsembleKind { RandomForest, GBDT };

struct Ensemble {
  EnsembleKind kind = EnsembleKind::GBDT;
  double base_score = 0.0;     // GBDT only
  double learning_rate = 1.0;  // GBDT only
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

// GBDT: base_score + eta * sum of trees. RF: mean of trees.
std::vector<double> predict_ensemble(const Ensemble& model, const Matrix& X);
double predict_ensemble_row(const Ensemble& model, std::span<const double> x);

struct RFConfig {
  int n_trees = 100;
  int max_depth = -1;
  int min_samples_leaf = 1;
  int max_features = 0;  // 0 = all features
  bool bootstrap = true;
  std::uint64_t seed = 0;
  int n_bins = 256;
  SplitMethod method = SplitMethod::Histogram;

  void validate(std::size_t n_features) const;
};

// Trees are fitted in parallel; each tree draws from its own sub-seed so the
// forest does not depend on the worker count.
Ensemble fit_random_forest(const Matrix& X, std::span<const double> y, const RFConfig& cfg,
                           Execution exec = Execution::Parallel);

struct GossConfig {
  double top_rate = 0.2;    // a
  double other_rate = 0.1;  // b
};

struct GBDTConfig {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double min_child_weight = 1.0;
  double reg_lambda = 1.0;
  double gamma = 0.0;
  int n_bins = 256;
  std::optional<GossConfig> goss;
  std::uint64_t seed = 0;
  SplitMethod method = SplitMethod::Histogram;

  void validate() const;
};

struct GossSample {
  std::vector<std::size_t> rows;  // ascending
  std::vector<double> weights;    // parallel to rows
};

// Gradient-based one-side sampling: keep the ceil(a n) largest |g| (ties to the
// lower row), draw ceil(b n) of the rest uniformly without replacement and
// weight them (1 - a) / b.
GossSample goss_sample(std::span<const double> abs_gradients, double top_rate, double other_rate, Rng& rng);

struct GbdtTrace {
  std::vector<double> train_rmse;  // after each round, index 0 = base score only
};

// Squared loss: g = yhat - y, h = 1.
Ensemble fit_gbdt(const Matrix& X, std::span<const double> y, const GBDTConfig& cfg,
                  GbdtTrace* trace = nullptr, Execution exec = Execution::Parallel);

}  // namespace wq
