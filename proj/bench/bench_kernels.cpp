// Wall-clock comparison of the serial reference path and the OpenMP path for
// each parallel kernel. Results must match; the timing ratio is the speedup.

#include <chrono>
#include <cstdio>
#include <functional>

#include "wq/ensemble.hpp"
#include "wq/model.hpp"
#include "wq/panel.hpp"
#include "wq/parallel.hpp"
#include "wq/shap.hpp"
#include "wq/synthetic.hpp"
#include "wq/tree.hpp"
#include "wq/tuner.hpp"

using namespace wq;

namespace {

double seconds(const std::function<void()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* kernel, double serial, double parallel, bool same) {
  std::printf("%-14s serial %8.3f s  parallel %8.3f s  speedup %5.2fx  %s\n", kernel, serial, parallel,
              parallel > 0 ? serial / parallel : 0.0, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) set_worker_count(std::atoi(argv[1]));
  std::printf("workers: %d\n", worker_count());

  SyntheticPanelSpec spec;
  spec.n_dates = 200;
  spec.n_sites = 37;
  spec.seed = 1;
  const auto table = stack_panel(synthetic_panel(spec));
  const Matrix& X = table.features;
  const auto& y = table.targets;

  {
    TreeParams p;
    p.max_depth = 8;
    RegressionTree a, b;
    const double s = seconds([&] { a = fit_tree(X, y, p, Execution::Serial); });
    const double q = seconds([&] { b = fit_tree(X, y, p, Execution::Parallel); });
    row("split search", s, q, a == b);
  }
  {
    RFConfig cfg;
    cfg.n_trees = 40;
    cfg.max_depth = 10;
    cfg.max_features = 5;
    Ensemble a, b;
    const double s = seconds([&] { a = fit_random_forest(X, y, cfg, Execution::Serial); });
    const double q = seconds([&] { b = fit_random_forest(X, y, cfg, Execution::Parallel); });
    row("forest", s, q, a == b);
  }
  {
    const auto model = fit_model(Family::LightGBM, json{{"n_trees", 50}, {"max_depth", 5}}, X, y, 1);
    const auto vf = ValueFunction::marginalize(model, sample_background(X, 128, 1), singleton_players(table.feature_names));
    const Matrix rows = X.select_rows(std::vector<std::size_t>{0, 1, 2, 3});
    ShapOptions so, po;
    so.exec = Execution::Serial;
    std::vector<ShapAttribution> a, b;
    const double s = seconds([&] { a = shap_for_dataset(vf, rows, so); });
    const double q = seconds([&] { b = shap_for_dataset(vf, rows, po); });
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) same = a[i].phi == b[i].phi;
    row("exact SHAP", s, q, same);
  }
  {
    const auto grid = HyperGrid::from_json({{"n_trees", {20, 40}}, {"max_depth", {3, 5}}, {"learning_rate", {0.1}}});
    const CVConfig cv{5, 2, FoldScheme::Shuffled};
    TuningResult a, b;
    const double s = seconds([&] { a = grid_search(Family::XGBoost, grid, X, y, cv, {1, Execution::Serial, false}); });
    const double q = seconds([&] { b = grid_search(Family::XGBoost, grid, X, y, cv, {1, Execution::Parallel, false}); });
    row("grid search", s, q, a.fold_scores == b.fold_scores);
  }
  return 0;
}
