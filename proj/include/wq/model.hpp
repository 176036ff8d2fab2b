#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wq/elastic_net.hpp"
#include "wq/ensemble.hpp"
#include "wq/matrix.hpp"
#include "wq/metrics.hpp"
#include "wq/mlp.hpp"
#include "wq/parallel.hpp"
#include "wq/tree.hpp"

namespace wq {

using json = nlohmann::json;

enum class Family {
  Benchmark,
  ElasticNet,
  RandomForest,
  XGBoost,   // second-order boosting, all rows every round
  LightGBM,  // second-order boosting with GOSS row sampling
  MLP,
  DecisionTree,
};

std::string family_key(Family f);           // "elastic_net", ...
std::string family_display_name(Family f);  // "Linear Regression", ...
Family parse_family(const std::string& key);
// Families cheap enough to refit 2^M times for the retrain Shapley value function.
bool is_cheap_to_fit(Family f);

// Uniform predictor shared by all families.
class TrainedModel {
 public:
  using Parameters = std::variant<BenchmarkModel, LinearModel, Ensemble, MLPModel, RegressionTree>;

  TrainedModel(Family family, json config, std::uint64_t seed, std::size_t n_features, Parameters params);

  Family family() const { return family_; }
  const json& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t n_features() const { return n_features_; }
  const Parameters& parameters() const { return params_; }

  std::vector<double> predict(const Matrix& X) const;
  double predict_row(std::span<const double> x) const;

  // Trees: total split gain per column. Linear: |coefficient|. Otherwise none.
  std::optional<std::vector<double>> feature_importance() const;

  json to_json() const;
  static TrainedModel from_json(const json& j);

 private:
  Family family_;
  json config_;
  std::uint64_t seed_;
  std::size_t n_features_;
  Parameters params_;
};

// Fits one family with hyperparameters from a JSON object. Unknown keys are a ConfigError.
TrainedModel fit_model(Family family, const json& hyperparams, const Matrix& X, std::span<const double> y,
                       std::uint64_t seed, Execution exec = Execution::Parallel);

ElasticNetConfig elastic_net_config(const json& hp);
RFConfig random_forest_config(const json& hp, std::size_t n_features, std::uint64_t seed);
GBDTConfig gbdt_config(Family family, const json& hp, std::uint64_t seed);
MLPConfig mlp_config(const json& hp, std::uint64_t seed);
TreeParams decision_tree_params(const json& hp);

json tree_to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const json& j);

}  // namespace wq
