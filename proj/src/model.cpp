#include "wq/model.hpp"

#include <cmath>
#include <set>

#include "wq/error.hpp"

namespace wq {

namespace {

struct FamilyInfo {
  Family family;
  const char* key;
  const char* display;
};

constexpr FamilyInfo kFamilies[] = {
    {Family::Benchmark, "benchmark", "Benchmarking"},
    {Family::ElasticNet, "elastic_net", "Linear Regression"},
    {Family::RandomForest, "random_forest", "Random Forest"},
    {Family::XGBoost, "xgboost", "XGBoost"},
    {Family::LightGBM, "lightgbm", "LightGBM"},
    {Family::MLP, "mlp", "MLP"},
    {Family::DecisionTree, "decision_tree", "Decision Tree"},
};

const FamilyInfo& info(Family f) {
  for (const auto& i : kFamilies)
    if (i.family == f) return i;
  throw ConfigError("unknown family");
}

// Reads hyperparameters, rejecting keys the family does not know.
class HyperReader {
 public:
  HyperReader(const json& hp, const std::string& family) : hp_(hp), family_(family) {
    if (!hp_.is_null() && !hp_.is_object()) throw ConfigError(family_ + ": hyperparameters must be a JSON object");
  }

  template <class T>
  T get(const char* key, T fallback) {
    known_.insert(key);
    if (hp_.is_null() || !hp_.contains(key)) return fallback;
    try {
      return hp_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(family_ + "." + key + ": " + e.what());
    }
  }
  bool has(const char* key) const { return hp_.is_object() && hp_.contains(key); }

  void finish() const {
    if (!hp_.is_object()) return;
    for (const auto& [k, v] : hp_.items())
      if (!known_.count(k)) throw ConfigError("unknown hyperparameter '" + k + "' for family " + family_);
  }

 private:
  const json& hp_;
  std::string family_;
  std::set<std::string> known_;
};

SplitMethod parse_split_method(const std::string& s) {
  if (s == "hist" || s == "histogram") return SplitMethod::Histogram;
  if (s == "exact") return SplitMethod::Exact;
  throw ConfigError("unknown split method '" + s + "' (hist, exact)");
}

}  // namespace

std::string family_key(Family f) { return info(f).key; }
std::string family_display_name(Family f) { return info(f).display; }

Family parse_family(const std::string& key) {
  for (const auto& i : kFamilies)
    if (key == i.key) return i.family;
  if (key == "linear_regression" || key == "linear") return Family::ElasticNet;
  if (key == "rf") return Family::RandomForest;
  throw ConfigError("unknown model family '" + key + "'");
}

bool is_cheap_to_fit(Family f) {
  return f == Family::Benchmark || f == Family::ElasticNet || f == Family::DecisionTree;
}

ElasticNetConfig elastic_net_config(const json& hp) {
  HyperReader r(hp, "elastic_net");
  ElasticNetConfig c;
  c.lambda = r.get("lambda", c.lambda);
  c.alpha = r.get("alpha", c.alpha);
  c.tol = r.get("tol", c.tol);
  c.max_iter = r.get("max_iter", c.max_iter);
  c.standardize_internally = r.get("standardize", c.standardize_internally);
  r.finish();
  c.validate();
  return c;
}

RFConfig random_forest_config(const json& hp, std::size_t n_features, std::uint64_t seed) {
  HyperReader r(hp, "random_forest");
  RFConfig c;
  c.seed = seed;
  c.n_trees = r.get("n_trees", c.n_trees);
  c.max_depth = r.get("max_depth", c.max_depth);
  c.min_samples_leaf = r.get("min_samples_leaf", c.min_samples_leaf);
  // Below 1 the value is a fraction of the feature count.
  const double mf = r.get("max_features", 0.0);
  if (mf < 0.0) throw ConfigError("random_forest.max_features must be >= 0");
  c.max_features = mf > 0.0 && mf < 1.0
                       ? std::max(1, static_cast<int>(std::ceil(mf * static_cast<double>(n_features))))
                       : static_cast<int>(mf);
  if (mf == 1.0) c.max_features = 0;
  c.bootstrap = r.get("bootstrap", c.bootstrap);
  c.n_bins = r.get("n_bins", c.n_bins);
  c.method = parse_split_method(r.get<std::string>("split", "hist"));
  r.finish();
  c.validate(n_features);
  return c;
}

GBDTConfig gbdt_config(Family family, const json& hp, std::uint64_t seed) {
  HyperReader r(hp, family_key(family));
  GBDTConfig c;
  c.seed = seed;
  c.n_trees = r.get("n_trees", c.n_trees);
  c.learning_rate = r.get("learning_rate", c.learning_rate);
  c.max_depth = r.get("max_depth", c.max_depth);
  c.min_child_weight = r.get("min_child_weight", c.min_child_weight);
  c.reg_lambda = r.get("reg_lambda", c.reg_lambda);
  c.gamma = r.get("gamma", c.gamma);
  c.n_bins = r.get("n_bins", c.n_bins);
  c.method = parse_split_method(r.get<std::string>("split", "hist"));
  if (family == Family::LightGBM) {
    GossConfig g;
    g.top_rate = r.get("top_rate", g.top_rate);
    g.other_rate = r.get("other_rate", g.other_rate);
    c.goss = g;
  }
  r.finish();
  c.validate();
  return c;
}

MLPConfig mlp_config(const json& hp, std::uint64_t seed) {
  HyperReader r(hp, "mlp");
  MLPConfig c;
  c.seed = seed;
  c.hidden_layers = r.get("hidden_layers", c.hidden_layers);
  c.activation = parse_activation(r.get<std::string>("activation", activation_name(c.activation)));
  c.learning_rate = r.get("learning_rate", c.learning_rate);
  c.batch_size = r.get("batch_size", c.batch_size);
  c.max_epochs = r.get("max_epochs", c.max_epochs);
  c.l2_penalty = r.get("l2_penalty", c.l2_penalty);
  c.momentum = r.get("momentum", c.momentum);
  if (r.get("early_stopping", false)) {
    EarlyStopping es;
    es.validation_fraction = r.get("validation_fraction", es.validation_fraction);
    es.patience = r.get("patience", es.patience);
    c.early_stop = es;
  } else {
    r.get("validation_fraction", 0.0);
    r.get("patience", 0);
  }
  r.finish();
  c.validate();
  return c;
}

TreeParams decision_tree_params(const json& hp) {
  HyperReader r(hp, "decision_tree");
  TreeParams p;
  p.max_depth = r.get("max_depth", -1);
  p.min_child_weight = r.get("min_samples_leaf", 1.0);
  p.n_bins = r.get("n_bins", p.n_bins);
  p.method = parse_split_method(r.get<std::string>("split", "hist"));
  r.finish();
  return p;
}

TrainedModel::TrainedModel(Family family, json config, std::uint64_t seed, std::size_t n_features,
                           Parameters params)
    : family_(family), config_(std::move(config)), seed_(seed), n_features_(n_features), params_(std::move(params)) {}

std::vector<double> TrainedModel::predict(const Matrix& X) const {
  if (X.cols() != n_features_)
    throw ModelError(family_key(family_) + " model expects " + std::to_string(n_features_) + " columns, got " +
                     std::to_string(X.cols()));
  return std::visit(
      [&](const auto& m) -> std::vector<double> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BenchmarkModel>) return m.predict(X.rows());
        if constexpr (std::is_same_v<T, LinearModel>) return predict_linear(m, X);
        if constexpr (std::is_same_v<T, Ensemble>) return predict_ensemble(m, X);
        if constexpr (std::is_same_v<T, MLPModel>) return predict_mlp(m, X);
        if constexpr (std::is_same_v<T, RegressionTree>) {
          std::vector<double> out(X.rows());
          for (std::size_t i = 0; i < X.rows(); ++i) out[i] = m.predict(X.row(i));
          return out;
        }
      },
      params_);
}

double TrainedModel::predict_row(std::span<const double> x) const {
  if (x.size() != n_features_) throw ModelError("row width does not match the model");
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BenchmarkModel>) return m.constant;
        if constexpr (std::is_same_v<T, LinearModel>) {
          double s = m.intercept;
          for (std::size_t j = 0; j < x.size(); ++j) s += m.coefficients[j] * x[j];
          return s;
        }
        if constexpr (std::is_same_v<T, Ensemble>) return predict_ensemble_row(m, x);
        if constexpr (std::is_same_v<T, MLPModel>) return predict_mlp_row(m, x);
        if constexpr (std::is_same_v<T, RegressionTree>) return m.predict(x);
      },
      params_);
}

std::optional<std::vector<double>> TrainedModel::feature_importance() const {
  if (const auto* lin = std::get_if<LinearModel>(&params_)) {
    std::vector<double> out;
    for (double c : lin->coefficients) out.push_back(std::abs(c));
    return out;
  }
  if (const auto* ens = std::get_if<Ensemble>(&params_)) return gain_importance(ens->trees, n_features_);
  if (const auto* tree = std::get_if<RegressionTree>(&params_))
    return gain_importance(std::span<const RegressionTree>(tree, 1), n_features_);
  return std::nullopt;
}

json tree_to_json(const RegressionTree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       value = json::array(), cover = json::array(), gain = json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    cover.push_back(n.cover);
    gain.push_back(n.gain);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
          {"value", value},     {"cover", cover},         {"gain", gain}};
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  const auto& feature = j.at("feature");
  t.nodes.resize(feature.size());
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    auto& n = t.nodes[i];
    n.feature = feature.at(i).get<int>();
    n.threshold = j.at("threshold").at(i).get<double>();
    n.left = j.at("left").at(i).get<int>();
    n.right = j.at("right").at(i).get<int>();
    n.value = j.at("value").at(i).get<double>();
    n.cover = j.at("cover").at(i).get<double>();
    n.gain = j.at("gain").at(i).get<double>();
    const auto count = static_cast<int>(t.nodes.size());
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
      throw ModelError("corrupt tree: node " + std::to_string(i) + " has invalid children");
  }
  if (t.nodes.empty()) throw ModelError("corrupt tree: no nodes");
  return t;
}

json TrainedModel::to_json() const {
  json params = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, BenchmarkModel>) return {{"constant", m.constant}};
        if constexpr (std::is_same_v<T, LinearModel>)
          return {{"intercept", m.intercept}, {"coefficients", m.coefficients}, {"sweeps_used", m.sweeps_used}};
        if constexpr (std::is_same_v<T, Ensemble>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          return {{"kind", m.kind == EnsembleKind::GBDT ? "gbdt" : "random_forest"},
                  {"base_score", m.base_score},
                  {"learning_rate", m.learning_rate},
                  {"trees", trees}};
        }
        if constexpr (std::is_same_v<T, MLPModel>) {
          json layers = json::array();
          for (const auto& l : m.layers)
            layers.push_back({{"n_in", l.n_in}, {"n_out", l.n_out}, {"weights", l.weights}, {"bias", l.bias}});
          return {{"activation", activation_name(m.activation)}, {"layers", layers}};
        }
        if constexpr (std::is_same_v<T, RegressionTree>) return {{"tree", tree_to_json(m)}};
      },
      params_);
  return {{"format", "wq-model"},
          {"version", 1},
          {"family", family_key(family_)},
          {"config", config_},
          {"seed", seed_},
          {"n_features", n_features_},
          {"parameters", params}};
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "wq-model") throw ModelError("not a model file");
    if (j.at("version").get<int>() != 1) throw ModelError("unsupported model file version");
    const Family family = parse_family(j.at("family").get<std::string>());
    const auto n_features = j.at("n_features").get<std::size_t>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    const json& p = j.at("parameters");
    Parameters params;
    switch (family) {
      case Family::Benchmark:
        params = BenchmarkModel{p.at("constant").get<double>()};
        break;
      case Family::ElasticNet: {
        LinearModel m;
        m.intercept = p.at("intercept").get<double>();
        m.coefficients = p.at("coefficients").get<std::vector<double>>();
        m.sweeps_used = p.at("sweeps_used").get<int>();
        if (m.coefficients.size() != n_features) throw ModelError("coefficient count does not match n_features");
        params = std::move(m);
        break;
      }
      case Family::RandomForest:
      case Family::XGBoost:
      case Family::LightGBM: {
        Ensemble e;
        e.kind = p.at("kind").get<std::string>() == "gbdt" ? EnsembleKind::GBDT : EnsembleKind::RandomForest;
        e.base_score = p.at("base_score").get<double>();
        e.learning_rate = p.at("learning_rate").get<double>();
        e.n_features = n_features;
        for (const auto& t : p.at("trees")) e.trees.push_back(tree_from_json(t));
        params = std::move(e);
        break;
      }
      case Family::MLP: {
        MLPModel m;
        m.activation = parse_activation(p.at("activation").get<std::string>());
        for (const auto& l : p.at("layers")) {
          DenseLayer d;
          d.n_in = l.at("n_in").get<std::size_t>();
          d.n_out = l.at("n_out").get<std::size_t>();
          d.weights = l.at("weights").get<std::vector<double>>();
          d.bias = l.at("bias").get<std::vector<double>>();
          if (d.weights.size() != d.n_in * d.n_out || d.bias.size() != d.n_out)
            throw ModelError("MLP layer dimensions are inconsistent");
          m.layers.push_back(std::move(d));
        }
        params = std::move(m);
        break;
      }
      case Family::DecisionTree:
        params = tree_from_json(p.at("tree"));
        break;
    }
    return TrainedModel(family, j.at("config"), seed, n_features, std::move(params));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model file: ") + e.what());
  }
}

TrainedModel fit_model(Family family, const json& hyperparams, const Matrix& X, std::span<const double> y,
                       std::uint64_t seed, Execution exec) {
  const json config = hyperparams.is_null() ? json::object() : hyperparams;
  switch (family) {
    case Family::Benchmark:
      HyperReader(config, "benchmark").finish();
      return {family, config, seed, X.cols(), fit_benchmark(y)};
    case Family::ElasticNet:
      return {family, config, seed, X.cols(), fit_elastic_net(X, y, elastic_net_config(config))};
    case Family::RandomForest:
      return {family, config, seed, X.cols(), fit_random_forest(X, y, random_forest_config(config, X.cols(), seed), exec)};
    case Family::XGBoost:
    case Family::LightGBM:
      return {family, config, seed, X.cols(), fit_gbdt(X, y, gbdt_config(family, config, seed), nullptr, exec)};
    case Family::MLP:
      return {family, config, seed, X.cols(), fit_mlp(X, y, mlp_config(config, seed)).model};
    case Family::DecisionTree:
      return {family, config, seed, X.cols(), fit_tree(X, y, decision_tree_params(config), exec)};
  }
  throw ConfigError("unknown family");
}

}  // namespace wq
