#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wq/features.hpp"
#include "wq/matrix.hpp"
#include "wq/metrics.hpp"
#include "wq/model.hpp"
#include "wq/panel.hpp"
#include "wq/parallel.hpp"

namespace wq {

enum class FoldScheme { Shuffled, BlockedByTime };

FoldScheme parse_fold_scheme(const std::string& s);
const char* fold_scheme_name(FoldScheme s);

struct CVConfig {
  int k = 5;
  std::uint64_t seed = 0;
  FoldScheme scheme = FoldScheme::Shuffled;
};

struct Fold {
  std::vector<std::size_t> train;       // ascending
  std::vector<std::size_t> validation;  // ascending
};

// Validation folds partition 0..n-1 with sizes differing by at most one.
std::vector<Fold> kfold_split(std::size_t n, const CVConfig& cfg);

// Named axes; configs are the cartesian product with the last axis varying fastest.
struct HyperGrid {
  std::vector<std::pair<std::string, std::vector<json>>> axes;

  std::size_t size() const;
  std::vector<json> configs() const;
  // {"lambda": [..], "alpha": [..]}; a scalar is a one-value axis. Axis order is key order.
  static HyperGrid from_json(const json& j);
  json to_json() const;
};

// Defaults sized after the fit counts the original study reports.
HyperGrid default_grid(Family family);

struct TuningResult {
  Family family = Family::Benchmark;
  std::vector<json> configs;
  std::vector<std::vector<double>> fold_scores;  // per config, per fold (-RMSE)
  std::vector<double> mean_scores;
  std::size_t best_index = 0;
  std::size_t total_fits = 0;
  double tuning_time = 0.0;     // seconds, wall clock
  double average_tuning = 0.0;  // tuning_time / total_fits
  double best_fit_time = 0.0;   // refit of the winner on all training rows
  std::optional<TrainedModel> best_model;

  const json& best_config() const { return configs.at(best_index); }
  // Deterministic part only (no timings).
  json selection_json() const;
  json to_json() const;
};

struct GridSearchOptions {
  std::uint64_t seed = 0;  // model seed shared by every fit
  Execution exec = Execution::Parallel;
  bool refit_best = true;
};

// Every config x fold is fitted and scored by -RMSE on the held-out fold; the
// best mean wins, ties to the earlier config. Config x fold fits run in parallel.
TuningResult grid_search(Family family, const HyperGrid& grid, const Matrix& X, std::span<const double> y,
                         const CVConfig& cv, const GridSearchOptions& options = {});

struct ResultsRow {
  std::string model;
  std::optional<MetricReport> metrics;
  std::optional<double> rmse_literal;  // published comparison value, RMSE only
};

struct ResultsTable {
  std::string title;
  std::vector<ResultsRow> rows;

  // Index of the best row per metric among rows with computed metrics.
  std::vector<std::size_t> best_rows() const;
  // Values x1000, 2 decimals; "N/A" where a metric is unavailable.
  std::string to_csv() const;
  std::string to_markdown() const;
  json to_json() const;
};

// Results-table caption for a feature strategy.
std::string strategy_title(Strategy s);

inline constexpr double kSadlIiRmse = 11.50e-3;
inline constexpr const char* kSadlIiName = "SADL-II (published)";

std::string timing_csv(std::span<const TuningResult> results);
std::string timing_markdown(std::span<const TuningResult> results);

struct FamilySpec {
  Family family;
  HyperGrid grid;
};

struct FeatureImportance {
  Family family;
  std::vector<std::string> columns;
  std::optional<std::vector<double>> values;  // nullopt: unavailable for this family
};

struct PipelineInputs {
  StackedTable train;
  StackedTable test;
  StrategyConfig strategy;
  std::vector<FamilySpec> families;
  CVConfig cv;
  std::uint64_t seed = 0;
  Execution exec = Execution::Parallel;
};

struct PipelineOutputs {
  ResultsTable results;
  std::vector<TuningResult> tuning;
  std::vector<FeatureImportance> importances;
  std::optional<StandardizationParams> standardizer;
  std::vector<std::string> site_vocabulary;
  double total_time = 0.0;
};

// Scoring choice, grids, timer, model init, CV tuning, test predictions,
// metrics, timer stop, feature importances. Persisting is `write_pipeline_outputs`.
PipelineOutputs run_pipeline(const PipelineInputs& in);
PipelineOutputs run_pipeline(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                             const PanelSchema& schema, const StrategyConfig& strategy,
                             std::vector<FamilySpec> families, const CVConfig& cv, std::uint64_t seed,
                             Execution exec = Execution::Parallel);

// Writes results_strategyN.{csv,md,json}, timing, tuning JSON, models and importances.
void write_pipeline_outputs(const PipelineOutputs& out, int strategy_number, const std::filesystem::path& dir);

std::string feature_importance_csv(std::span<const FeatureImportance> importances);

}  // namespace wq
