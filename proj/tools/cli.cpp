#include "wq/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wq/csv.hpp"
#include "wq/error.hpp"
#include "wq/panel.hpp"
#include "wq/parallel.hpp"
#include "wq/random.hpp"
#include "wq/synthetic.hpp"

namespace wq {

namespace fs = std::filesystem;

namespace {

json parse_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const json& value, const std::string& what) {
  if (!value.is_string()) throw ConfigError(what + " must be a path string");
  const fs::path p = value.get<std::string>();
  return p.is_absolute() ? p : base / p;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

std::string rows_spec_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_unsigned()) return "first:" + std::to_string(j.get<std::size_t>());
  if (j.is_array()) {
    std::string s;
    for (const auto& v : j) {
      if (!v.is_number_unsigned()) throw ConfigError("shap.rows entries must be non-negative integers");
      s += (s.empty() ? "" : ",") + std::to_string(v.get<std::size_t>());
    }
    return s;
  }
  throw ConfigError("shap.rows must be a string, a count or a list of row indices");
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw ConfigError("bad " + what + " '" + s + "'");
  return static_cast<std::size_t>(v);
}

// --- data access -------------------------------------------------------------

PanelSchema resolve_schema(const RunConfig& cfg) {
  if (cfg.schema) return PanelSchema::from_json_file(*cfg.schema);
  require_file(cfg.train, "training data");
  const CsvTable t = read_csv(cfg.train);
  PanelSchema s;
  for (const auto& h : t.header)
    if (h != s.date_column && h != s.site_column && h != s.target_column) s.features.push_back({h, h});
  if (s.features.empty()) throw DataError(cfg.train.string() + ": no feature columns besides date, site_id and Y");
  return s;
}

StackedTable load_table(const fs::path& path, const PanelSchema& schema, const std::string& what) {
  require_file(path, what);
  return stack_panel(load_panel(path, schema));
}

const fs::path& test_path(const RunConfig& cfg) {
  if (!cfg.test) throw ConfigError("data.test is required for this command");
  return *cfg.test;
}

// Everything needed to rebuild a strategy's design matrix from raw rows.
struct Preprocess {
  StrategyConfig strategy;
  std::optional<StandardizationParams> standardizer;
  std::vector<std::string> site_vocabulary;
  std::vector<std::string> column_names;
  std::vector<FeatureGroup> groups;

  json to_json() const {
    json j;
    j["strategy"] = static_cast<int>(strategy.strategy);
    const auto& c = strategy.categorical;
    j["features"] = {{"site", c.site}, {"month", c.month}, {"weekday", c.weekday},
                     {"season", c.season}, {"year", c.year}, {"day", c.day}};
    j["standardizer"] = standardizer ? json{{"mean", standardizer->mean}, {"sd", standardizer->sd}} : json(nullptr);
    j["site_vocabulary"] = site_vocabulary;
    j["column_names"] = column_names;
    json groups_json = json::array();
    for (const auto& g : groups) groups_json.push_back({{"name", g.name}, {"columns", g.columns}});
    j["groups"] = groups_json;
    return j;
  }

  static Preprocess from_json(const json& j) {
    Preprocess p;
    p.strategy = StrategyConfig::for_strategy(j.at("strategy").get<int>());
    const auto& f = j.at("features");
    auto& c = p.strategy.categorical;
    c.site = f.at("site");
    c.month = f.at("month");
    c.weekday = f.at("weekday");
    c.season = f.at("season");
    c.year = f.at("year");
    c.day = f.at("day");
    if (!j.at("standardizer").is_null())
      p.standardizer = StandardizationParams{j["standardizer"].at("mean").get<std::vector<double>>(),
                                             j["standardizer"].at("sd").get<std::vector<double>>()};
    p.site_vocabulary = j.at("site_vocabulary").get<std::vector<std::string>>();
    p.column_names = j.at("column_names").get<std::vector<std::string>>();
    for (const auto& g : j.at("groups"))
      p.groups.push_back({g.at("name").get<std::string>(), g.at("columns").get<std::vector<std::size_t>>()});
    return p;
  }
};

StrategyConfig strategy_config(const RunConfig& cfg, int n) {
  StrategyConfig s = StrategyConfig::for_strategy(n);
  s.categorical = cfg.features;
  s.validate();
  return s;
}

std::pair<Preprocess, DesignMatrix> fit_preprocess(const StackedTable& train, const StrategyConfig& s) {
  Preprocess p;
  p.strategy = s;
  if (s.needs_standardizer()) p.standardizer = fit_standardizer(train.features);
  p.site_vocabulary = site_vocabulary_of(train);
  DesignMatrix d = assemble_design(train, s, p.standardizer ? &*p.standardizer : nullptr, p.site_vocabulary);
  p.column_names = d.column_names;
  p.groups = d.groups;
  return {std::move(p), std::move(d)};
}

DesignMatrix apply_preprocess(const Preprocess& p, const StackedTable& table) {
  DesignMatrix d = assemble_design(table, p.strategy, p.standardizer ? &*p.standardizer : nullptr, p.site_vocabulary);
  if (d.column_names != p.column_names)
    throw DataError("design columns differ from the ones the models were tuned on (feature set changed?)");
  return d;
}

std::string strategy_tag(int n) { return "strategy" + std::to_string(n); }

fs::path preprocess_path(const RunConfig& cfg, int n) { return cfg.output_dir / ("preprocess_" + strategy_tag(n) + ".json"); }

fs::path model_path(const RunConfig& cfg, int n, Family f) {
  return cfg.output_dir / ("model_" + strategy_tag(n) + "_" + family_key(f) + ".json");
}

Preprocess read_preprocess(const RunConfig& cfg, int n) {
  const fs::path p = preprocess_path(cfg, n);
  if (!fs::exists(p)) throw ConfigError(p.string() + " not found; run `tune --strategy " + std::to_string(n) + "` first");
  try {
    return Preprocess::from_json(parse_json_file(p));
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

TrainedModel read_model(const fs::path& p) {
  require_file(p, "model file");
  try {
    return TrainedModel::from_json(parse_json_file(p));
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

// --- commands ----------------------------------------------------------------

int cmd_ingest(const RunConfig& cfg) {
  const PanelSchema schema = resolve_schema(cfg);
  std::optional<std::vector<SiteInfo>> sites;
  if (cfg.sites) {
    require_file(*cfg.sites, "sites file");
    sites = load_sites(*cfg.sites);
  }
  std::vector<std::pair<std::string, fs::path>> inputs{{"train", cfg.train}};
  if (cfg.test) inputs.emplace_back("test", *cfg.test);
  for (const auto& [name, path] : inputs) {
    require_file(path, name + " data");
    const PanelDataset ds = load_panel(path, schema);
    const ValidationReport rep = validate_panel(ds);
    const fs::path report_path = cfg.output_dir / ("validation_" + name + ".json");
    write_text_file(report_path, rep.to_json());
    if (!rep.passed) {
      std::cerr << "validation failed for " << path.string() << ": " << rep.total_non_finite()
                << " non-finite cells; report: " << report_path.string() << "\n";
      return kExitValidation;
    }
    if (sites) {
      for (const auto& id : ds.site_ids()) {
        const bool known = std::any_of(sites->begin(), sites->end(), [&](const SiteInfo& s) { return s.site_id == id; });
        if (!known) throw DataError(path.string() + ": site " + id + " is not listed in " + cfg.sites->string());
      }
    }
    save_panel_cache(ds, cfg.output_dir / "cache" / (name + ".wqpanel"));
    std::cout << name << ": " << ds.n_dates() << " dates \xC3\x97 " << ds.n_sites() << " sites \xC3\x97 "
              << ds.n_features() << " features, " << rep.total_non_finite() << " missing";
    if (!rep.range_warnings.empty()) std::cout << " (" << rep.range_warnings.size() << " values outside [0, 1])";
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_stats(const RunConfig& cfg) {
  const StackedTable train = load_table(cfg.train, resolve_schema(cfg), "training data");
  write_text_file(cfg.output_dir / "summary_stats.csv", summarize(train).to_csv());
  const CorrelationMatrix corr = correlation_matrix(train);
  write_text_file(cfg.output_dir / "correlation.csv", corr.to_csv());
  for (const auto& w : corr.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << (cfg.output_dir / "summary_stats.csv").string() << " and "
            << (cfg.output_dir / "correlation.csv").string() << "\n";
  return kExitOk;
}

int cmd_tune(const RunConfig& cfg, int n, const std::vector<Family>& families) {
  const StackedTable train = load_table(cfg.train, resolve_schema(cfg), "training data");
  const auto [pre, design] = fit_preprocess(train, strategy_config(cfg, n));
  write_json(preprocess_path(cfg, n), pre.to_json());

  const TrainedModel bench(Family::Benchmark, json::object(), cfg.seed, design.n_cols(), fit_benchmark(design.y));
  write_text_file(model_path(cfg, n, Family::Benchmark), bench.to_json().dump() + "\n");

  const std::string tag = strategy_tag(n);
  std::vector<TuningResult> results;
  std::vector<FeatureImportance> importances;
  for (Family f : families) {
    if (f == Family::Benchmark) continue;
    GridSearchOptions opt;
    opt.seed = derive_seed(cfg.seed, family_key(f));
    opt.exec = cfg.exec();
    CVConfig cv = cfg.cv;
    cv.seed = derive_seed(cfg.seed, "folds");
    TuningResult tr = grid_search(f, cfg.grid_for(f), design.X, design.y, cv, opt);
    const auto key = family_key(f);
    write_text_file(cfg.output_dir / ("tuning_" + tag + "_" + key + ".json"), tr.to_json().dump(2) + "\n");
    write_text_file(cfg.output_dir / ("best_config_" + tag + "_" + key + ".json"), tr.selection_json().dump(2) + "\n");
    write_text_file(model_path(cfg, n, f), tr.best_model->to_json().dump() + "\n");
    std::cout << tag << " " << key << ": " << tr.configs.size() << " configs, " << tr.total_fits
              << " fits, best CV RMSE " << format_fixed(-tr.mean_scores[tr.best_index], 6) << ", "
              << format_fixed(tr.tuning_time, 2) << " s\n";
    importances.push_back({f, design.column_names, tr.best_model->feature_importance()});
    results.push_back(std::move(tr));
  }
  write_text_file(cfg.output_dir / ("timing_" + tag + ".csv"), timing_csv(results));
  write_text_file(cfg.output_dir / ("importance_" + tag + ".csv"), feature_importance_csv(importances));
  return kExitOk;
}

std::vector<fs::path> default_model_files(const RunConfig& cfg, int n) {
  std::vector<fs::path> files;
  const std::string prefix = "model_" + strategy_tag(n) + "_";
  if (!fs::exists(cfg.output_dir)) return files;
  for (const auto& e : fs::directory_iterator(cfg.output_dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && e.path().extension() == ".json" && name != prefix + "benchmark.json")
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_evaluate(const RunConfig& cfg, int n, std::vector<fs::path> model_files) {
  const Preprocess pre = read_preprocess(cfg, n);
  const PanelSchema schema = resolve_schema(cfg);
  const DesignMatrix test = apply_preprocess(pre, load_table(test_path(cfg), schema, "test data"));

  ResultsTable table;
  table.title = strategy_title(pre.strategy.strategy);
  table.rows.push_back({kSadlIiName, std::nullopt, kSadlIiRmse});
  const fs::path bench_file = model_path(cfg, n, Family::Benchmark);
  const TrainedModel bench = fs::exists(bench_file)
                                 ? read_model(bench_file)
                                 : TrainedModel(Family::Benchmark, json::object(), cfg.seed, test.n_cols(),
                                                fit_benchmark(apply_preprocess(pre, load_table(cfg.train, schema, "training data")).y));
  table.rows.push_back({family_display_name(Family::Benchmark), evaluate(test.y, bench.predict(test.X)), std::nullopt});

  if (model_files.empty()) model_files = default_model_files(cfg, n);
  std::vector<ResultsRow> rows;
  for (const auto& p : model_files) {
    const TrainedModel m = read_model(p);
    if (m.family() == Family::Benchmark) continue;
    if (m.n_features() != test.n_cols())
      throw ConfigError(p.string() + " expects " + std::to_string(m.n_features()) + " columns, strategy " +
                        std::to_string(n) + " design has " + std::to_string(test.n_cols()));
    rows.push_back({family_display_name(m.family()), evaluate(test.y, m.predict(test.X)), std::nullopt});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ResultsRow& a, const ResultsRow& b) { return a.model < b.model; });
  for (auto& r : rows) table.rows.push_back(std::move(r));

  const std::string tag = strategy_tag(n);
  write_text_file(cfg.output_dir / ("results_" + tag + ".csv"), table.to_csv());
  write_text_file(cfg.output_dir / ("results_" + tag + ".md"), table.to_markdown());
  write_text_file(cfg.output_dir / ("results_" + tag + ".json"), table.to_json().dump(2) + "\n");
  std::cout << table.to_markdown();
  return kExitOk;
}

struct ExplainRequest {
  std::optional<fs::path> model_file;
  std::optional<std::string> rows;
  std::optional<ValueFunctionKind> kind;
};

int cmd_explain(const RunConfig& cfg, int n, const ExplainRequest& req) {
  const Preprocess pre = read_preprocess(cfg, n);
  const PanelSchema schema = resolve_schema(cfg);
  const TrainedModel model = read_model(req.model_file.value_or(model_path(cfg, n, cfg.shap.family)));
  const DesignMatrix train = apply_preprocess(pre, load_table(cfg.train, schema, "training data"));
  if (model.n_features() != train.n_cols())
    throw ConfigError("model expects " + std::to_string(model.n_features()) + " columns, strategy " +
                      std::to_string(n) + " design has " + std::to_string(train.n_cols()));
  if (pre.groups.size() > cfg.shap.max_players)
    throw ConfigError("strategy " + std::to_string(n) + " has " + std::to_string(pre.groups.size()) +
                      " SHAP players, above shap.max_players = " + std::to_string(cfg.shap.max_players));

  const ValueFunctionKind kind = req.kind.value_or(cfg.shap.kind);
  const ValueFunction vf =
      kind == ValueFunctionKind::Marginalize
          ? ValueFunction::marginalize(model, sample_background(train.X, cfg.shap.background_size, cfg.seed), pre.groups)
          : ValueFunction::retrain(model.family(), model.config(), train.X, train.y, pre.groups, model.seed());

  const DesignMatrix source =
      cfg.shap.dataset == "train" ? train : apply_preprocess(pre, load_table(test_path(cfg), schema, "test data"));
  const auto rows = select_rows(req.rows.value_or(cfg.shap.rows), source.n_rows(), derive_seed(cfg.seed, "shap-rows"));
  const Matrix X = source.X.select_rows(rows);

  ShapOptions opt;
  opt.max_players = cfg.shap.max_players;
  opt.exec = cfg.exec();
  const auto attributions = shap_for_dataset(vf, X, opt);
  const auto ranking = mean_abs_shap(attributions);

  double worst_gap = 0.0;
  for (const auto& a : attributions) {
    double s = a.base_value;
    for (double v : a.phi) s += v;
    worst_gap = std::max(worst_gap, std::abs(s - a.f_x));
  }

  std::string dir_name = strategy_tag(n) + "_" + family_key(model.family());
  if (kind == ValueFunctionKind::Retrain) dir_name += "_retrain";
  const fs::path dir = cfg.output_dir / "shap" / dir_name;
  write_text_file(dir / "shap_values.csv", shap_values_csv(attributions, X, rows, pre.groups));
  write_text_file(dir / "shap_mean_abs.csv", shap_mean_abs_csv(ranking));
  json summary{{"model", family_key(model.family())},
               {"strategy", n},
               {"value_function", kind == ValueFunctionKind::Marginalize ? "marginalize" : "retrain"},
               {"dataset", cfg.shap.dataset},
               {"rows", rows.size()},
               {"players", pre.groups.size()},
               {"max_efficiency_gap", worst_gap}};
  if (kind == ValueFunctionKind::Marginalize)
    summary["background_rows"] = std::min(cfg.shap.background_size, train.n_rows());
  write_json(dir / "shap_summary.json", summary);

  std::cout << dir_name << ": " << rows.size() << " rows, " << pre.groups.size() << " players; top features:";
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranking.size()); ++i)
    std::cout << " " << ranking[i].name << " (" << format_fixed(ranking[i].mean_abs_phi, 6) << ")";
  std::cout << "\n";
  return kExitOk;
}

std::string csv_to_markdown(const CsvTable& t) {
  std::string out = "|";
  for (const auto& h : t.header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += i == 0 ? "---|" : "---:|";
  out += "\n";
  for (const auto& r : t.rows) {
    out += "|";
    for (const auto& v : r) out += " " + v + " |";
    out += "\n";
  }
  return out;
}

void append_long_csv(std::string& out, const std::string& section, const CsvTable& t) {
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.rows[r].size() && c < t.header.size(); ++c)
      out += csv_escape(section) + "," + std::to_string(r) + "," + csv_escape(t.header[c]) + "," +
             csv_escape(t.rows[r][c]) + "\n";
}

int cmd_report(const RunConfig& cfg) {
  const fs::path& dir = cfg.output_dir;
  std::string md = "# Water quality prediction report\n";
  std::string csv = "section,row,column,value\n";
  bool any = false;
  for (int n = 1; n <= 3; ++n) {
    const std::string tag = strategy_tag(n);
    const fs::path results = dir / ("results_" + tag + ".csv");
    if (!fs::exists(results)) continue;
    any = true;
    md += "\n## Strategy " + std::to_string(n) + "\n\n";
    const fs::path results_md = dir / ("results_" + tag + ".md");
    md += fs::exists(results_md) ? read_text_file(results_md) : csv_to_markdown(read_csv(results));
    append_long_csv(csv, "results_" + tag, read_csv(results));
    const fs::path timing = dir / ("timing_" + tag + ".csv");
    if (fs::exists(timing)) {
      const CsvTable t = read_csv(timing);
      md += "\n### Tuning time (seconds)\n\n" + csv_to_markdown(t);
      append_long_csv(csv, "timing_" + tag, t);
    }
  }
  if (!any) throw ConfigError("nothing to report in " + dir.string() + " (no results_strategyN.csv; run evaluate first)");

  const fs::path shap_root = dir / "shap";
  if (fs::exists(shap_root)) {
    std::vector<fs::path> runs;
    for (const auto& e : fs::directory_iterator(shap_root))
      if (fs::exists(e.path() / "shap_mean_abs.csv")) runs.push_back(e.path());
    std::sort(runs.begin(), runs.end());
    if (!runs.empty()) md += "\n## Mean |SHAP| rankings\n";
    for (const auto& r : runs) {
      const CsvTable t = read_csv(r / "shap_mean_abs.csv");
      md += "\n### " + r.filename().string() + "\n\n" + csv_to_markdown(t);
      append_long_csv(csv, "shap_" + r.filename().string(), t);
    }
  }
  write_text_file(dir / "report.md", md);
  write_text_file(dir / "report.csv", csv);
  std::cout << "wrote " << (dir / "report.md").string() << " and " << (dir / "report.csv").string() << "\n";
  return kExitOk;
}

struct SynthRequest {
  fs::path out;
  std::size_t dates = 60;
  std::size_t test_dates = 20;
  std::size_t sites = 5;
  std::size_t features = 11;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthRequest& req) {
  SyntheticPanelSpec spec;
  spec.n_dates = req.dates + req.test_dates;
  spec.n_sites = req.sites;
  spec.n_features = req.features;
  spec.seed = req.seed;
  const auto [train, test] = split_by_date(synthetic_panel(spec), req.dates);
  write_text_file(req.out / "train.csv", panel_to_csv(train));
  write_text_file(req.out / "test.csv", panel_to_csv(test));
  const json cfg = {
      {"seed", req.seed},
      {"data", {{"train", "train.csv"}, {"test", "test.csv"}}},
      {"output_dir", "out"},
      {"strategies", {1, 2, 3}},
      {"cv", {{"k", 3}, {"scheme", "shuffled"}}},
      {"families", {"elastic_net", "random_forest", "xgboost", "lightgbm", "mlp"}},
      {"grids",
       {{"elastic_net", {{"alpha", {0.5, 1.0}}, {"lambda", {1e-4, 1e-2}}}},
        {"random_forest", {{"n_trees", {20}}, {"max_depth", {6}}, {"max_features", {0.5}}}},
        {"xgboost", {{"n_trees", {40}}, {"max_depth", {3, 5}}, {"learning_rate", {0.1}}}},
        {"lightgbm", {{"n_trees", {40}}, {"max_depth", {3, 5}}, {"learning_rate", {0.1}}}},
        {"mlp", {{"hidden_layers", {{16}}}, {"max_epochs", {150}}, {"learning_rate", {0.01}}, {"momentum", {0.9}}}}}},
      {"shap", {{"family", "lightgbm"}, {"rows", "first:10"}, {"background_size", 64}}}};
  write_json(req.out / "config.json", cfg);
  std::cout << "wrote " << (req.out / "train.csv").string() << ", " << (req.out / "test.csv").string() << " and "
            << (req.out / "config.json").string() << "\n";
  return kExitOk;
}

int cmd_run(const RunConfig& cfg) {
  if (int rc = cmd_ingest(cfg); rc != kExitOk) return rc;
  cmd_stats(cfg);
  for (int n : cfg.strategies) {
    cmd_tune(cfg, n, cfg.families);
    cmd_evaluate(cfg, n, {});
    const bool explainable = cfg.shap.enabled && fs::exists(model_path(cfg, n, cfg.shap.family)) &&
                             read_preprocess(cfg, n).groups.size() <= cfg.shap.max_players;
    if (explainable) cmd_explain(cfg, n, {});
  }
  return cmd_report(cfg);
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

HyperGrid RunConfig::grid_for(Family f) const {
  const auto it = grids.find(family_key(f));
  return it == grids.end() ? default_grid(f) : it->second;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  check_keys(j, {"seed", "data", "output_dir", "threads", "parallel", "strategies", "features", "cv", "families", "grids", "shap"},
             "config");
  RunConfig c;
  try {
    if (!j.contains("seed")) throw ConfigError("config: 'seed' is mandatory (no clock-based default)");
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config: 'seed' must be a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();

    if (!j.contains("data")) throw ConfigError("config: 'data' section is mandatory");
    const json& d = j["data"];
    check_keys(d, {"train", "test", "schema", "sites"}, "data");
    if (!d.contains("train")) throw ConfigError("config: data.train is mandatory");
    c.train = resolve(base_dir, d["train"], "data.train");
    if (d.contains("test")) c.test = resolve(base_dir, d["test"], "data.test");
    if (d.contains("schema")) c.schema = resolve(base_dir, d["schema"], "data.schema");
    if (d.contains("sites")) c.sites = resolve(base_dir, d["sites"], "data.sites");

    c.output_dir = resolve(base_dir, j.value("output_dir", json("wq_output")), "output_dir");
    c.threads = j.value("threads", 0);
    if (c.threads < 0) throw ConfigError("config: threads must be >= 0");
    c.parallel = j.value("parallel", true);

    if (j.contains("strategies")) {
      const json& s = j["strategies"];
      c.strategies = s.is_array() ? s.get<std::vector<int>>() : std::vector<int>{s.get<int>()};
      if (c.strategies.empty()) throw ConfigError("config: strategies is empty");
      for (int n : c.strategies)
        if (n < 1 || n > 3) throw ConfigError("config: strategy " + std::to_string(n) + " is not 1, 2 or 3");
    }

    if (j.contains("features")) {
      const json& f = j["features"];
      check_keys(f, {"site", "month", "weekday", "season", "year", "day"}, "features");
      c.features.site = f.value("site", c.features.site);
      c.features.month = f.value("month", c.features.month);
      c.features.weekday = f.value("weekday", c.features.weekday);
      c.features.season = f.value("season", c.features.season);
      c.features.year = f.value("year", c.features.year);
      c.features.day = f.value("day", c.features.day);
    }

    if (j.contains("cv")) {
      const json& cv = j["cv"];
      check_keys(cv, {"k", "scheme"}, "cv");
      c.cv.k = cv.value("k", c.cv.k);
      if (cv.contains("scheme")) c.cv.scheme = parse_fold_scheme(cv["scheme"].get<std::string>());
      if (c.cv.k < 2) throw ConfigError("config: cv.k must be >= 2");
    }

    if (j.contains("families")) {
      c.families.clear();
      for (const auto& f : j["families"]) {
        const Family fam = parse_family(f.get<std::string>());
        if (fam != Family::Benchmark && std::find(c.families.begin(), c.families.end(), fam) == c.families.end())
          c.families.push_back(fam);
      }
    }

    if (j.contains("grids")) {
      if (!j["grids"].is_object()) throw ConfigError("config: grids must be an object keyed by family");
      for (const auto& [key, grid] : j["grids"].items()) c.grids[family_key(parse_family(key))] = HyperGrid::from_json(grid);
    }

    if (j.contains("shap")) {
      const json& s = j["shap"];
      check_keys(s, {"enabled", "kind", "background_size", "rows", "dataset", "family", "max_players"}, "shap");
      c.shap.enabled = s.value("enabled", c.shap.enabled);
      if (s.contains("kind")) c.shap.kind = parse_value_function_kind(s["kind"].get<std::string>());
      c.shap.background_size = s.value("background_size", c.shap.background_size);
      if (c.shap.background_size == 0) throw ConfigError("config: shap.background_size must be >= 1");
      if (s.contains("rows")) c.shap.rows = rows_spec_from_json(s["rows"]);
      c.shap.dataset = s.value("dataset", c.shap.dataset);
      if (c.shap.dataset != "test" && c.shap.dataset != "train")
        throw ConfigError("config: shap.dataset must be \"test\" or \"train\"");
      if (s.contains("family")) c.shap.family = parse_family(s["family"].get<std::string>());
      c.shap.max_players = s.value("max_players", c.shap.max_players);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  return from_json(parse_json_file(path), fs::absolute(path).parent_path());
}

std::vector<std::size_t> select_rows(const std::string& spec, std::size_t n_rows, std::uint64_t seed) {
  if (n_rows == 0) throw ConfigError("no rows to select from");
  std::vector<std::size_t> rows;
  if (spec == "all") {
    rows.resize(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) rows[i] = i;
    return rows;
  }
  if (spec.rfind("first:", 0) == 0) {
    const std::size_t k = std::min(parse_count(spec.substr(6), "row count"), n_rows);
    for (std::size_t i = 0; i < k; ++i) rows.push_back(i);
    if (rows.empty()) throw ConfigError("row selection '" + spec + "' is empty");
    return rows;
  }
  if (spec.rfind("sample:", 0) == 0) {
    const std::size_t k = std::min(parse_count(spec.substr(7), "row count"), n_rows);
    if (k == 0) throw ConfigError("row selection '" + spec + "' is empty");
    Rng rng(seed);
    rows = rng.sample_without_replacement(n_rows, k);
    std::sort(rows.begin(), rows.end());
    return rows;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    const std::size_t a = parse_count(item.substr(0, dash), "row index");
    const std::size_t b = dash == std::string::npos ? a : parse_count(item.substr(dash + 1), "row index");
    if (b < a || b >= n_rows)
      throw ConfigError("row selection '" + item + "' is outside 0.." + std::to_string(n_rows - 1));
    for (std::size_t i = a; i <= b; ++i) rows.push_back(i);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  if (rows.empty()) throw ConfigError("row selection '" + spec + "' is empty");
  return rows;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Panel regression toolkit for water quality prediction"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = -1;
  bool serial = false;
  std::vector<int> strategies;
  std::vector<std::string> family_keys;
  std::vector<std::string> model_files;
  std::string rows;
  std::string kind;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    sub->add_option("-o,--output-dir", output_dir, "Output directory (overrides WQ_OUTPUT_DIR and the config)");
    sub->add_option("-j,--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--serial", serial, "Use the serial reference kernels");
  };
  auto add_strategy = [&](CLI::App* sub) {
    sub->add_option("-s,--strategy", strategies, "Feature strategy 1, 2 or 3 (default: the config's list)")
        ->check(CLI::Range(1, 3));
  };

  auto* ingest = app.add_subcommand("ingest", "Validate the panel files and write a binary cache");
  auto* stats = app.add_subcommand("stats", "Summary statistics and correlation matrix of the training panel");
  auto* tune = app.add_subcommand("tune", "Cross-validated grid search; writes tuning results and best models");
  auto* eval = app.add_subcommand("evaluate", "Score tuned models on the test panel");
  auto* explain = app.add_subcommand("explain", "Exact Shapley attributions for a tuned model");
  auto* report = app.add_subcommand("report", "Combine results, timing and SHAP rankings into one bundle");
  auto* run = app.add_subcommand("run", "ingest, stats, tune, evaluate, explain and report in one go");
  for (auto* sub : {ingest, stats, tune, eval, explain, report, run}) add_common(sub);
  for (auto* sub : {tune, eval, explain}) add_strategy(sub);
  tune->add_option("-f,--family", family_keys, "Families to tune (default: the config's list)");
  eval->add_option("-m,--model", model_files, "Model files (default: every model of the strategy)");
  explain->add_option("-m,--model", model_files, "Model file (default: shap.family of the strategy)");
  explain->add_option("-r,--rows", rows, "Rows: all, first:N, sample:N or a list like 0,3,10-12");
  explain->add_option("-k,--kind", kind, "Value function: marginalize or retrain");

  SynthRequest synth_req;
  auto* synth = app.add_subcommand("synth", "Write a synthetic train/test panel and a matching config");
  synth->add_option("-o,--out", synth_req.out, "Directory for train.csv, test.csv and config.json")->required();
  synth->add_option("--dates", synth_req.dates, "Training dates");
  synth->add_option("--test-dates", synth_req.test_dates, "Test dates");
  synth->add_option("--sites", synth_req.sites, "Sites");
  synth->add_option("--features", synth_req.features, "Numeric features");
  synth->add_option("--seed", synth_req.seed, "Seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  return guarded([&]() -> int {
    if (synth->parsed()) return cmd_synth(synth_req);

    RunConfig cfg = RunConfig::load(config_path);
    if (const char* env = std::getenv("WQ_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (threads >= 0) cfg.threads = threads;
    if (serial) cfg.parallel = false;
    set_worker_count(cfg.threads);
    fs::create_directories(cfg.output_dir);
    const std::vector<int> selected = strategies.empty() ? cfg.strategies : strategies;

    if (ingest->parsed()) return cmd_ingest(cfg);
    if (stats->parsed()) return cmd_stats(cfg);
    if (report->parsed()) return cmd_report(cfg);
    if (run->parsed()) return cmd_run(cfg);
    if (tune->parsed()) {
      std::vector<Family> fams = cfg.families;
      if (!family_keys.empty()) {
        fams.clear();
        for (const auto& k : family_keys) fams.push_back(parse_family(k));
      }
      for (int n : selected) cmd_tune(cfg, n, fams);
      return kExitOk;
    }
    if (eval->parsed()) {
      std::vector<fs::path> files(model_files.begin(), model_files.end());
      if (!files.empty() && selected.size() != 1) throw ConfigError("--model needs exactly one --strategy");
      for (int n : selected) cmd_evaluate(cfg, n, files);
      return kExitOk;
    }
    if (explain->parsed()) {
      ExplainRequest req;
      if (model_files.size() > 1) throw ConfigError("explain takes one --model");
      if (!model_files.empty()) {
        if (selected.size() != 1) throw ConfigError("--model needs exactly one --strategy");
        req.model_file = model_files.front();
      }
      if (!rows.empty()) req.rows = rows;
      if (!kind.empty()) req.kind = parse_value_function_kind(kind);
      for (int n : selected) cmd_explain(cfg, n, req);
      return kExitOk;
    }
    return kExitConfig;
  });
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace wq
