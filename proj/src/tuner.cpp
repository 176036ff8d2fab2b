#include "wq/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <numeric>

#include "wq/csv.hpp"
#include "wq/error.hpp"
#include "wq/random.hpp"

namespace wq {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

FoldScheme parse_fold_scheme(const std::string& s) {
  if (s == "shuffled") return FoldScheme::Shuffled;
  if (s == "blocked" || s == "blocked_by_time") return FoldScheme::BlockedByTime;
  throw ConfigError("unknown fold scheme '" + s + "' (shuffled, blocked_by_time)");
}

const char* fold_scheme_name(FoldScheme s) {
  return s == FoldScheme::Shuffled ? "shuffled" : "blocked_by_time";
}

std::vector<Fold> kfold_split(std::size_t n, const CVConfig& cfg) {
  if (cfg.k < 2) throw ConfigError("k-fold needs k >= 2");
  const auto k = static_cast<std::size_t>(cfg.k);
  if (n < k) throw ConfigError("k-fold needs at least k rows (n = " + std::to_string(n) + ", k = " + std::to_string(k) + ")");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (cfg.scheme == FoldScheme::Shuffled) {
    Rng rng(derive_seed(cfg.seed, "folds"));
    order = rng.permutation(n);
  }
  std::vector<Fold> folds(k);
  std::vector<std::size_t> fold_of(n);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t i = start; i < start + size; ++i) fold_of[order[i]] = f;
    start += size;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) (fold_of[i] == f ? folds[f].validation : folds[f].train).push_back(i);
  return folds;
}

std::size_t HyperGrid::size() const {
  std::size_t s = 1;
  for (const auto& [name, values] : axes) s *= values.size();
  return s;
}

std::vector<json> HyperGrid::configs() const {
  std::vector<json> out{json::object()};
  for (const auto& [name, values] : axes) {
    std::vector<json> next;
    next.reserve(out.size() * values.size());
    for (const auto& partial : out)
      for (const auto& v : values) {
        json c = partial;
        c[name] = v;
        next.push_back(std::move(c));
      }
    out = std::move(next);
  }
  return out;
}

HyperGrid HyperGrid::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("hyperparameter grid must be a JSON object");
  HyperGrid g;
  for (const auto& [name, values] : j.items()) {
    std::vector<json> vs;
    // hidden_layers values are themselves arrays: a list of lists is an axis,
    // a flat list of numbers is a single value.
    const bool list_axis = values.is_array() && !(name == "hidden_layers" && !values.empty() && values[0].is_number());
    if (list_axis) {
      for (const auto& v : values) vs.push_back(v);
    } else {
      vs.push_back(values);
    }
    if (vs.empty()) throw ConfigError("hyperparameter axis '" + name + "' is empty");
    g.axes.emplace_back(name, std::move(vs));
  }
  return g;
}

json HyperGrid::to_json() const {
  json j = json::object();
  for (const auto& [name, values] : axes) j[name] = values;
  return j;
}

HyperGrid default_grid(Family family) {
  auto axis = [](std::initializer_list<json> v) { return std::vector<json>(v); };
  HyperGrid g;
  switch (family) {
    case Family::Benchmark:
      break;
    case Family::ElasticNet:  // 30 configs
      g.axes = {{"alpha", axis({0.0, 0.25, 0.5, 0.75, 1.0})},
                {"lambda", axis({1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0})}};
      break;
    case Family::RandomForest:  // 240 configs
      g.axes = {{"max_depth", axis({8, 12, 16, -1})},
                {"max_features", axis({0.3, 0.5, 0.7, 0.9, 1.0})},
                {"min_samples_leaf", axis({1, 2, 5})},
                {"n_trees", axis({50, 100, 200, 400})}};
      break;
    case Family::XGBoost:  // 1152 configs
      g.axes = {{"gamma", axis({0.0, 1e-4})},
                {"learning_rate", axis({0.03, 0.1, 0.2, 0.3})},
                {"max_depth", axis({3, 5, 7, 9})},
                {"min_child_weight", axis({1.0, 5.0, 10.0})},
                {"n_trees", axis({100, 200, 400, 800})},
                {"reg_lambda", axis({0.0, 1.0, 10.0})}};
      break;
    case Family::LightGBM:  // 400 configs
      g.axes = {{"learning_rate", axis({0.01, 0.05, 0.1, 0.2, 0.3})},
                {"max_depth", axis({3, 5, 7, 9, 11})},
                {"n_trees", axis({100, 200, 400, 800})},
                {"top_rate", axis({0.1, 0.2, 0.3, 0.4})}};
      break;
    case Family::MLP:  // 8 configs
      g.axes = {{"activation", axis({"relu", "tanh"})},
                {"hidden_layers", axis({json::array({32}), json::array({64}), json::array({64, 32}),
                                        json::array({128, 64})})}};
      break;
    case Family::DecisionTree:
      g.axes = {{"max_depth", axis({4, 6, 8, 10, -1})}, {"min_samples_leaf", axis({1, 5, 20})}};
      break;
  }
  return g;
}

json TuningResult::selection_json() const {
  json scores = json::array();
  for (std::size_t c = 0; c < configs.size(); ++c)
    scores.push_back({{"config", configs[c]}, {"mean_score", mean_scores[c]}, {"fold_scores", fold_scores[c]}});
  return {{"family", family_key(family)},
          {"best_config", best_config()},
          {"best_mean_score", mean_scores.at(best_index)},
          {"total_fits", total_fits},
          {"configs", scores}};
}

json TuningResult::to_json() const {
  json j = selection_json();
  j["tuning_time"] = tuning_time;
  j["average_tuning"] = average_tuning;
  j["best_fit_time"] = best_fit_time;
  return j;
}

TuningResult grid_search(Family family, const HyperGrid& grid, const Matrix& X, std::span<const double> y,
                         const CVConfig& cv, const GridSearchOptions& options) {
  TuningResult result;
  result.family = family;
  result.configs = grid.configs();
  if (result.configs.empty()) throw ConfigError("empty hyperparameter grid for " + family_key(family));
  const auto folds = kfold_split(X.rows(), cv);
  const std::size_t n_cfg = result.configs.size();
  const std::size_t k = folds.size();
  result.fold_scores.assign(n_cfg, std::vector<double>(k, 0.0));
  std::vector<std::string> errors(n_cfg * k);
  std::vector<char> config_errors(n_cfg * k, 0);
  std::atomic<std::size_t> fits{0};
  const bool parallel = options.exec == Execution::Parallel;

  const auto t0 = Clock::now();
  const auto n_tasks = static_cast<std::ptrdiff_t>(n_cfg * k);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t t = 0; t < n_tasks; ++t) {
    const auto c = static_cast<std::size_t>(t) / k;
    const auto f = static_cast<std::size_t>(t) % k;
    try {
      const Fold& fold = folds[f];
      const Matrix x_train = X.select_rows(fold.train);
      const auto y_train = select(y, fold.train);
      const Matrix x_val = X.select_rows(fold.validation);
      const auto y_val = select(y, fold.validation);
      const TrainedModel m = fit_model(family, result.configs[c], x_train, y_train, options.seed, options.exec);
      result.fold_scores[c][f] = score(y_val, m.predict(x_val));
      fits.fetch_add(1, std::memory_order_relaxed);
    } catch (const ConfigError& e) {
      errors[static_cast<std::size_t>(t)] = e.what();
      config_errors[static_cast<std::size_t>(t)] = 1;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(t)] = e.what();
    }
  }
  result.tuning_time = seconds_since(t0);

  for (std::size_t t = 0; t < errors.size(); ++t)
    if (!errors[t].empty()) {
      const std::size_t c = t / k;
      const std::string what = family_key(family) + " config #" + std::to_string(c) + " " +
                               result.configs[c].dump() + " (fold " + std::to_string(t % k) + "): " + errors[t];
      if (config_errors[t]) throw ConfigError("invalid hyperparameters for " + what);
      throw ModelError("grid search failed for " + what);
    }

  result.mean_scores.resize(n_cfg);
  for (std::size_t c = 0; c < n_cfg; ++c) {
    double s = 0.0;
    for (double v : result.fold_scores[c]) s += v;
    result.mean_scores[c] = s / static_cast<double>(k);
    if (result.mean_scores[c] > result.mean_scores[result.best_index]) result.best_index = c;
  }
  result.total_fits = fits.load();
  result.average_tuning = result.total_fits ? result.tuning_time / static_cast<double>(result.total_fits) : 0.0;

  if (options.refit_best) {
    const auto t1 = Clock::now();
    result.best_model = fit_model(family, result.best_config(), X, y, options.seed, options.exec);
    result.best_fit_time = seconds_since(t1);
  }
  return result;
}

namespace {

constexpr const char* kMetricNames[] = {"RMSE", "MAPE", "WMAPE", "WUPRED", "WOPRED"};

double metric_value(const MetricReport& m, std::size_t i) {
  switch (i) {
    case 0: return m.rmse;
    case 1: return m.mape;
    case 2: return m.wmape;
    case 3: return m.wupred;
    default: return m.wopred;
  }
}

std::optional<double> cell(const ResultsRow& row, std::size_t i) {
  if (row.metrics) return metric_value(*row.metrics, i);
  if (i == 0 && row.rmse_literal) return *row.rmse_literal;
  return std::nullopt;
}

std::string display(std::optional<double> v) { return v ? format_fixed(*v * 1000.0, 2) : "N/A"; }

}  // namespace

std::vector<std::size_t> ResultsTable::best_rows() const {
  std::vector<std::size_t> best(5, rows.size());
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (!rows[r].metrics) continue;
      const double v = metric_value(*rows[r].metrics, i);
      if (best[i] == rows.size() || v < metric_value(*rows[best[i]].metrics, i)) best[i] = r;
    }
  return best;
}

std::string ResultsTable::to_csv() const {
  const auto best = best_rows();
  std::string out = "model,RMSE,MAPE,WMAPE,WUPRED,WOPRED,best\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += csv_escape(rows[r].model);
    std::string flags;
    for (std::size_t i = 0; i < 5; ++i) {
      out += "," + display(cell(rows[r], i));
      if (best[i] == r) flags += (flags.empty() ? "" : ";") + std::string(kMetricNames[i]);
    }
    out += "," + flags + "\n";
  }
  return out;
}

std::string ResultsTable::to_markdown() const {
  const auto best = best_rows();
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += "| Models | RMSE | MAPE | WMAPE | WUPRED | WOPRED |\n|---|---:|---:|---:|---:|---:|\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += "| " + rows[r].model;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto text = display(cell(rows[r], i));
      out += " | " + (best[i] == r ? "**" + text + "**" : text);
    }
    out += " |\n";
  }
  out += "\nBold marks the best value per metric. All values are their original values x 1000.\n";
  return out;
}

json ResultsTable::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    json row = {{"model", r.model}};
    if (r.metrics)
      row["metrics"] = {{"rmse", r.metrics->rmse}, {"mape", r.metrics->mape}, {"wmape", r.metrics->wmape},
                        {"wupred", r.metrics->wupred}, {"wopred", r.metrics->wopred}, {"n", r.metrics->n}};
    if (r.rmse_literal) row["rmse_literal"] = *r.rmse_literal;
    rows_json.push_back(row);
  }
  return {{"title", title}, {"rows", rows_json}};
}

std::string timing_csv(std::span<const TuningResult> results) {
  std::string out = "model,total_fits,tuning_time,average_tuning,best_fit_time\n";
  for (const auto& r : results)
    out += csv_escape(family_display_name(r.family)) + "," + std::to_string(r.total_fits) + "," +
           format_fixed(r.tuning_time, 4) + "," + format_fixed(r.average_tuning, 4) + "," +
           format_fixed(r.best_fit_time, 4) + "\n";
  return out;
}

std::string timing_markdown(std::span<const TuningResult> results) {
  std::string out = "| Models | Total Fits | Tuning Time | Average Tuning | Fitting Time (Best Model) |\n"
                    "|---|---:|---:|---:|---:|\n";
  for (const auto& r : results)
    out += "| " + family_display_name(r.family) + " | " + std::to_string(r.total_fits) + " | " +
           format_fixed(r.tuning_time, 2) + " | " + format_fixed(r.average_tuning, 2) + " | " +
           format_fixed(r.best_fit_time, 2) + " |\n";
  out += "\nRunning times in seconds.\n";
  return out;
}

std::string strategy_title(Strategy s) {
  switch (s) {
    case Strategy::RawNumeric: return "Water Quality Prediction Results (Numerical Features Only)";
    case Strategy::StandardizedNumeric: return "Water Quality Prediction Results (Numerical Features Only; Standardized)";
    case Strategy::StandardizedPlusCategorical:
      return "Water Quality Prediction Results (Numerical Features: Standardized; Categorical Features: One-Hot Encoding)";
  }
  return "";
}

PipelineOutputs run_pipeline(const PipelineInputs& in) {
  PipelineOutputs out;
  // Step 1 (scoring = -RMSE) lives in grid_search; step 2 (grids) arrives in `in.families`.
  const auto t0 = Clock::now();  // step 3
  in.strategy.validate();
  if (in.strategy.needs_standardizer()) out.standardizer = fit_standardizer(in.train.features);
  out.site_vocabulary = site_vocabulary_of(in.train);
  const StandardizationParams* params = out.standardizer ? &*out.standardizer : nullptr;
  const DesignMatrix train = assemble_design(in.train, in.strategy, params, out.site_vocabulary);
  const DesignMatrix test = assemble_design(in.test, in.strategy, params, out.site_vocabulary);

  out.results.title = strategy_title(in.strategy.strategy);
  out.results.rows.push_back({kSadlIiName, std::nullopt, kSadlIiRmse});
  const BenchmarkModel bench = fit_benchmark(train.y);
  out.results.rows.push_back({family_display_name(Family::Benchmark), evaluate(test.y, bench.predict(test.n_rows())), std::nullopt});

  std::vector<ResultsRow> family_rows;
  for (const auto& spec : in.families) {  // steps 4-7
    if (spec.family == Family::Benchmark) continue;
    GridSearchOptions opt;
    opt.seed = derive_seed(in.seed, family_key(spec.family));
    opt.exec = in.exec;
    CVConfig cv = in.cv;
    cv.seed = derive_seed(in.seed, "folds");
    TuningResult tr;
    try {
      tr = grid_search(spec.family, spec.grid, train.X, train.y, cv, opt);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("tuning stage: ") + e.what());
    } catch (const Error& e) {
      throw ModelError(std::string("tuning stage: ") + e.what());
    }
    const auto pred = tr.best_model->predict(test.X);
    family_rows.push_back({family_display_name(spec.family), evaluate(test.y, pred), std::nullopt});
    out.tuning.push_back(std::move(tr));
  }
  std::stable_sort(family_rows.begin(), family_rows.end(),
                   [](const ResultsRow& a, const ResultsRow& b) { return a.model < b.model; });
  for (auto& r : family_rows) out.results.rows.push_back(std::move(r));
  out.total_time = seconds_since(t0);  // step 8

  for (const auto& tr : out.tuning)  // step 9
    out.importances.push_back({tr.family, train.column_names, tr.best_model->feature_importance()});
  return out;
}

PipelineOutputs run_pipeline(const std::filesystem::path& train_csv, const std::filesystem::path& test_csv,
                             const PanelSchema& schema, const StrategyConfig& strategy,
                             std::vector<FamilySpec> families, const CVConfig& cv, std::uint64_t seed,
                             Execution exec) {
  PipelineInputs in;
  auto load = [&](const std::filesystem::path& p) {
    try {
      return stack_panel(load_panel(p, schema));
    } catch (const Error& e) {
      throw DataError(std::string("ingest stage: ") + e.what());
    }
  };
  in.train = load(train_csv);
  in.test = load(test_csv);
  in.strategy = strategy;
  in.families = std::move(families);
  in.cv = cv;
  in.seed = seed;
  in.exec = exec;
  return run_pipeline(in);
}

std::string feature_importance_csv(std::span<const FeatureImportance> importances) {
  std::string out = "model,feature,importance\n";
  for (const auto& imp : importances) {
    for (std::size_t c = 0; c < imp.columns.size(); ++c)
      out += csv_escape(family_display_name(imp.family)) + "," + csv_escape(imp.columns[c]) + "," +
             (imp.values ? format_double((*imp.values)[c]) : std::string("unavailable")) + "\n";
  }
  return out;
}

void write_pipeline_outputs(const PipelineOutputs& out, int strategy_number, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string s = "strategy" + std::to_string(strategy_number);
  write_text_file(dir / ("results_" + s + ".csv"), out.results.to_csv());
  write_text_file(dir / ("results_" + s + ".md"), out.results.to_markdown());
  write_text_file(dir / ("results_" + s + ".json"), out.results.to_json().dump(2) + "\n");
  write_text_file(dir / ("timing_" + s + ".csv"), timing_csv(out.tuning));
  write_text_file(dir / ("importance_" + s + ".csv"), feature_importance_csv(out.importances));
  for (const auto& tr : out.tuning) {
    const auto key = family_key(tr.family);
    write_text_file(dir / ("tuning_" + s + "_" + key + ".json"), tr.to_json().dump(2) + "\n");
    write_text_file(dir / ("best_config_" + s + "_" + key + ".json"), tr.selection_json().dump(2) + "\n");
    if (tr.best_model) write_text_file(dir / ("model_" + s + "_" + key + ".json"), tr.best_model->to_json().dump() + "\n");
  }
}

}  // namespace wq
