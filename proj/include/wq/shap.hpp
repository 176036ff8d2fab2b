#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "wq/features.hpp"
#include "wq/matrix.hpp"
#include "wq/model.hpp"
#include "wq/parallel.hpp"

namespace wq {

using BatchPredictor = std::function<std::vector<double>(const Matrix&)>;

enum class ValueFunctionKind { Marginalize, Retrain };

ValueFunctionKind parse_value_function_kind(const std::string& s);

// Coalition value v(S) for the players of one instance. A player is a group of
// design columns (one numeric column, or a whole one-hot block).
class ValueFunction {
 public:
  // v(S) = mean over background rows b of f(x on S, b elsewhere).
  static ValueFunction marginalize(BatchPredictor model, Matrix background, std::vector<FeatureGroup> players);
  static ValueFunction marginalize(const TrainedModel& model, Matrix background, std::vector<FeatureGroup> players);

  // v(S) = prediction at x of `family` refitted on the columns of S; v(empty) = mean(y).
  // Only families flagged cheap to fit are accepted.
  static ValueFunction retrain(Family family, json hyperparams, Matrix train_X, std::vector<double> train_y,
                               std::vector<FeatureGroup> players, std::uint64_t seed = 0);

  ValueFunctionKind kind() const { return kind_; }
  std::size_t n_players() const { return players_.size(); }
  std::size_t n_columns() const { return n_columns_; }
  const std::vector<FeatureGroup>& players() const { return players_; }

  // mask bit i set = player i present.
  double value(std::uint64_t mask, std::span<const double> x) const;
  // Model output at x (the full coalition for retrain).
  double full_output(std::span<const double> x) const;

 private:
  ValueFunction() = default;

  ValueFunctionKind kind_ = ValueFunctionKind::Marginalize;
  std::vector<FeatureGroup> players_;
  std::size_t n_columns_ = 0;
  BatchPredictor model_;
  Matrix background_;
  Family family_ = Family::ElasticNet;
  json hyperparams_;
  Matrix train_X_;
  std::vector<double> train_y_;
  std::uint64_t seed_ = 0;
};

// One player per column.
std::vector<FeatureGroup> singleton_players(std::span<const std::string> column_names);

struct ShapAttribution {
  std::vector<double> phi;
  double base_value = 0.0;  // v(empty)
  double f_x = 0.0;
  std::vector<std::string> feature_names;
};

struct ShapOptions {
  std::size_t max_players = 15;
  Execution exec = Execution::Parallel;
};

// Exact Shapley values by enumerating all 2^M coalitions:
//   phi_i = sum_{S not containing i} |S|! (M-|S|-1)! / M! [v(S + i) - v(S)].
ShapAttribution exact_shap(const ValueFunction& vf, std::span<const double> x, const ShapOptions& options = {});

std::vector<ShapAttribution> shap_for_dataset(const ValueFunction& vf, const Matrix& X,
                                              const ShapOptions& options = {});

struct RankedFeature {
  std::size_t index = 0;
  std::string name;
  double mean_abs_phi = 0.0;
};

// Descending mean |phi|, ties by player index.
std::vector<RankedFeature> mean_abs_shap(std::span<const ShapAttribution> attributions);

// Seeded uniform sample of at most max_rows rows (all rows, in order, when smaller).
Matrix sample_background(const Matrix& train, std::size_t max_rows, std::uint64_t seed);

// row,feature,value,phi. For a multi-column player `value` is the position of
// the active column inside the block.
std::string shap_values_csv(std::span<const ShapAttribution> attributions, const Matrix& X,
                            std::span<const std::size_t> row_ids, const std::vector<FeatureGroup>& players);
std::string shap_mean_abs_csv(std::span<const RankedFeature> ranking);

}  // namespace wq
