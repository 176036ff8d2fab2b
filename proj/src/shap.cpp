#include "wq/shap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "wq/csv.hpp"
#include "wq/error.hpp"
#include "wq/random.hpp"

namespace wq {

ValueFunctionKind parse_value_function_kind(const std::string& s) {
  if (s == "marginalize" || s == "interventional") return ValueFunctionKind::Marginalize;
  if (s == "retrain") return ValueFunctionKind::Retrain;
  throw ConfigError("unknown SHAP value function '" + s + "' (marginalize, retrain)");
}

namespace {

std::size_t column_count(const std::vector<FeatureGroup>& players) {
  std::size_t n = 0;
  for (const auto& p : players)
    for (auto c : p.columns) n = std::max(n, c + 1);
  return n;
}

}  // namespace

ValueFunction ValueFunction::marginalize(BatchPredictor model, Matrix background, std::vector<FeatureGroup> players) {
  if (background.rows() == 0) throw ConfigError("marginalize value function needs a non-empty background set");
  if (column_count(players) > background.cols()) throw ConfigError("players reference columns beyond the background width");
  ValueFunction vf;
  vf.kind_ = ValueFunctionKind::Marginalize;
  vf.model_ = std::move(model);
  vf.n_columns_ = background.cols();
  vf.background_ = std::move(background);
  vf.players_ = std::move(players);
  return vf;
}

ValueFunction ValueFunction::marginalize(const TrainedModel& model, Matrix background, std::vector<FeatureGroup> players) {
  return marginalize([model](const Matrix& X) { return model.predict(X); }, std::move(background), std::move(players));
}

ValueFunction ValueFunction::retrain(Family family, json hyperparams, Matrix train_X, std::vector<double> train_y,
                                     std::vector<FeatureGroup> players, std::uint64_t seed) {
  if (!is_cheap_to_fit(family))
    throw ConfigError("retrain value function refits 2^M models; family " + family_key(family) +
                      " is not cheap to fit (use elastic_net, benchmark or decision_tree)");
  if (train_X.rows() == 0 || train_X.rows() != train_y.size()) throw ConfigError("retrain value function needs training data");
  ValueFunction vf;
  vf.kind_ = ValueFunctionKind::Retrain;
  vf.family_ = family;
  vf.hyperparams_ = std::move(hyperparams);
  vf.n_columns_ = train_X.cols();
  vf.train_X_ = std::move(train_X);
  vf.train_y_ = std::move(train_y);
  vf.players_ = std::move(players);
  vf.seed_ = seed;
  return vf;
}

double ValueFunction::value(std::uint64_t mask, std::span<const double> x) const {
  if (kind_ == ValueFunctionKind::Marginalize) {
    Matrix batch = background_;
    for (std::size_t i = 0; i < players_.size(); ++i) {
      if (!(mask >> i & 1u)) continue;
      for (auto c : players_[i].columns)
        for (std::size_t r = 0; r < batch.rows(); ++r) batch(r, c) = x[c];
    }
    const auto pred = model_(batch);
    double s = 0.0;
    for (double v : pred) s += v;
    return s / static_cast<double>(pred.size());
  }
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < players_.size(); ++i)
    if (mask >> i & 1u) cols.insert(cols.end(), players_[i].columns.begin(), players_[i].columns.end());
  if (cols.empty()) {
    double s = 0.0;
    for (double v : train_y_) s += v;
    return s / static_cast<double>(train_y_.size());
  }
  std::sort(cols.begin(), cols.end());
  const TrainedModel m = fit_model(family_, hyperparams_, train_X_.select_cols(cols), train_y_, seed_, Execution::Serial);
  std::vector<double> x_sub;
  for (auto c : cols) x_sub.push_back(x[c]);
  return m.predict_row(x_sub);
}

double ValueFunction::full_output(std::span<const double> x) const {
  if (kind_ == ValueFunctionKind::Marginalize) {
    Matrix one(1, x.size(), std::vector<double>(x.begin(), x.end()));
    return model_(one).at(0);
  }
  return value((std::uint64_t{1} << players_.size()) - 1, x);
}

std::vector<FeatureGroup> singleton_players(std::span<const std::string> column_names) {
  std::vector<FeatureGroup> players;
  for (std::size_t c = 0; c < column_names.size(); ++c) players.push_back({column_names[c], {c}});
  return players;
}

ShapAttribution exact_shap(const ValueFunction& vf, std::span<const double> x, const ShapOptions& options) {
  const std::size_t m = vf.n_players();
  if (m > options.max_players || m > 30)
    throw ConfigError("exact SHAP over " + std::to_string(m) + " players exceeds the cap of " +
                      std::to_string(options.max_players) + " (2^M coalitions)");
  if (x.size() != vf.n_columns())
    throw ConfigError("instance has " + std::to_string(x.size()) + " columns, value function expects " +
                      std::to_string(vf.n_columns()));

  const std::uint64_t n_masks = std::uint64_t{1} << m;
  std::vector<double> v(n_masks);
  const auto n = static_cast<std::ptrdiff_t>(n_masks);
  std::vector<std::string> errors(n_masks);
#pragma omp parallel for schedule(dynamic) if (options.exec == Execution::Parallel)
  for (std::ptrdiff_t s = 0; s < n; ++s) {
    try {
      v[static_cast<std::size_t>(s)] = vf.value(static_cast<std::uint64_t>(s), x);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(s)] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw ModelError("SHAP coalition evaluation failed: " + e);

  // weight[s] = s! (M-s-1)! / M!
  std::vector<double> weight(m, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    double w = 1.0 / static_cast<double>(m);
    // 1/M * 1/C(M-1, s)
    for (std::size_t k = 1; k <= s; ++k) w *= static_cast<double>(k) / static_cast<double>(m - 1 - s + k);
    weight[s] = w;
  }

  ShapAttribution a;
  a.phi.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::uint64_t bit = std::uint64_t{1} << i;
    double phi = 0.0;
    for (std::uint64_t s = 0; s < n_masks; ++s) {
      if (s & bit) continue;
      phi += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    a.phi[i] = phi;
  }
  a.base_value = v[0];
  a.f_x = vf.kind() == ValueFunctionKind::Marginalize ? vf.full_output(x) : v[n_masks - 1];
  for (const auto& p : vf.players()) a.feature_names.push_back(p.name);
  return a;
}

std::vector<ShapAttribution> shap_for_dataset(const ValueFunction& vf, const Matrix& X, const ShapOptions& options) {
  std::vector<ShapAttribution> out;
  out.reserve(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out.push_back(exact_shap(vf, X.row(r), options));
  return out;
}

std::vector<RankedFeature> mean_abs_shap(std::span<const ShapAttribution> attributions) {
  if (attributions.empty()) throw ConfigError("mean |SHAP| needs at least one attribution");
  const std::size_t m = attributions.front().phi.size();
  std::vector<RankedFeature> ranked(m);
  for (std::size_t i = 0; i < m; ++i) {
    ranked[i].index = i;
    ranked[i].name = i < attributions.front().feature_names.size() ? attributions.front().feature_names[i] : "";
    double s = 0.0;
    for (const auto& a : attributions) s += std::abs(a.phi.at(i));
    ranked[i].mean_abs_phi = s / static_cast<double>(attributions.size());
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedFeature& a, const RankedFeature& b) { return a.mean_abs_phi > b.mean_abs_phi; });
  return ranked;
}

Matrix sample_background(const Matrix& train, std::size_t max_rows, std::uint64_t seed) {
  if (train.rows() <= max_rows) return train;
  Rng rng(derive_seed(seed, "shap-background"));
  auto rows = rng.sample_without_replacement(train.rows(), max_rows);
  std::sort(rows.begin(), rows.end());
  return train.select_rows(rows);
}

std::string shap_values_csv(std::span<const ShapAttribution> attributions, const Matrix& X,
                            std::span<const std::size_t> row_ids, const std::vector<FeatureGroup>& players) {
  std::string out = "row,feature,value,phi\n";
  for (std::size_t k = 0; k < attributions.size(); ++k) {
    const auto& a = attributions[k];
    for (std::size_t i = 0; i < players.size(); ++i) {
      const auto& cols = players[i].columns;
      double value = X(k, cols.front());
      if (cols.size() > 1) {
        value = -1.0;
        for (std::size_t j = 0; j < cols.size(); ++j)
          if (X(k, cols[j]) == 1.0) value = static_cast<double>(j);
      }
      out += std::to_string(row_ids[k]) + "," + csv_escape(players[i].name) + "," + format_double(value) + "," +
             format_double(a.phi[i]) + "\n";
    }
  }
  return out;
}

std::string shap_mean_abs_csv(std::span<const RankedFeature> ranking) {
  std::string out = "rank,feature,mean_abs_phi\n";
  for (std::size_t r = 0; r < ranking.size(); ++r)
    out += std::to_string(r + 1) + "," + csv_escape(ranking[r].name) + "," + format_double(ranking[r].mean_abs_phi) + "\n";
  return out;
}

}  // namespace wq
