#include "wq/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "wq/error.hpp"

namespace wq {

double RegressionTree::predict(std::span<const double> x) const {
  return nodes[static_cast<std::size_t>(leaf_index(x))].value;
}

int RegressionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

void TreeParams::validate(std::size_t n_features) const {
  if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be >= 0");
  if (!(reg_lambda >= 0.0)) throw ConfigError("reg_lambda must be >= 0");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (max_features < 0 || static_cast<std::size_t>(max_features) > n_features)
    throw ConfigError("max_features must be in [0, " + std::to_string(n_features) + "]");
}

BinnedData::BinnedData(const Matrix& X, int n_bins) : X_(&X) {
  const std::size_t n = X.rows(), p = X.cols();
  thresholds_.resize(p);
  distinct_.resize(p);
  bins_.resize(n * p);
  std::vector<double> sorted(n);
  for (std::size_t f = 0; f < p; ++f) {
    for (std::size_t r = 0; r < n; ++r) sorted[r] = X(r, f);
    std::sort(sorted.begin(), sorted.end());
    auto& distinct = distinct_[f];
    distinct.assign(sorted.begin(), sorted.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto& thr = thresholds_[f];
    if (distinct.size() <= static_cast<std::size_t>(n_bins)) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) thr.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    } else {
      for (int q = 1; q < n_bins; ++q) {
        const std::size_t idx = static_cast<std::size_t>(q) * n / static_cast<std::size_t>(n_bins);
        const double v = sorted[std::min(idx, n - 1)];
        if (v >= distinct.back()) continue;
        const double t = threshold_after(f, v);
        if (thr.empty() || t > thr.back()) thr.push_back(t);
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      const double x = X(r, f);
      bins_[r * p + f] = static_cast<std::uint32_t>(std::lower_bound(thr.begin(), thr.end(), x) - thr.begin());
    }
  }
}

double BinnedData::threshold_after(std::size_t f, double v) const {
  const auto& d = distinct_[f];
  auto it = std::upper_bound(d.begin(), d.end(), v);
  if (it == d.end()) return v;
  return 0.5 * (v + *it);
}

double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const double sl = gl * gl / (hl + lambda);
  const double sr = gr * gr / (hr + lambda);
  const double g = gl + gr;
  const double sp = g * g / (hl + hr + lambda);
  double bracket = sl + sr - sp;
  if (bracket <= 1e-10 * (sl + sr)) bracket = 0.0;
  return 0.5 * bracket - gamma;
}

namespace {

struct NodeTotals {
  double g = 0.0;
  double h = 0.0;
};

NodeTotals totals(std::span<const GradientPair> gh, std::span<const std::size_t> rows) {
  NodeTotals t;
  for (auto r : rows) {
    t.g += gh[r].g;
    t.h += gh[r].h;
  }
  return t;
}

// Scans ordered (g, h, count) buckets left to right; a bucket boundary is a candidate.
template <class ThresholdOf>
SplitCandidate scan_buckets(int feature, std::span<const double> bg, std::span<const double> bh,
                            std::span<const std::size_t> bc, NodeTotals node, std::size_t node_count,
                            const TreeParams& params, ThresholdOf threshold_of) {
  SplitCandidate best;
  double gl = 0.0, hl = 0.0;
  std::size_t cl = 0;
  for (std::size_t b = 0; b + 1 < bg.size(); ++b) {
    gl += bg[b];
    hl += bh[b];
    cl += bc[b];
    if (cl == 0 || cl == node_count) continue;
    const double gr = node.g - gl;
    const double hr = node.h - hl;
    if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
    const double gain = split_gain(gl, hl, gr, hr, params.reg_lambda, params.gamma);
    if (gain > 0.0 && (!best.valid() || gain > best.gain)) {
      best.feature = feature;
      best.threshold = threshold_of(b);
      best.gain = gain;
      best.left_g = gl;
      best.left_h = hl;
    }
  }
  return best;
}

SplitCandidate best_for_feature_histogram(const BinnedData& data, std::span<const GradientPair> gh,
                                          std::span<const std::size_t> rows, std::size_t f,
                                          NodeTotals node, const TreeParams& params) {
  const std::size_t nb = data.n_bins(f);
  std::vector<double> bg(nb, 0.0), bh(nb, 0.0);
  std::vector<std::size_t> bc(nb, 0);
  for (auto r : rows) {
    const auto b = data.bin(r, f);
    bg[b] += gh[r].g;
    bh[b] += gh[r].h;
    ++bc[b];
  }
  auto thr = data.thresholds(f);
  return scan_buckets(static_cast<int>(f), bg, bh, bc, node, rows.size(), params,
                      [&](std::size_t b) { return thr[b]; });
}

SplitCandidate best_for_feature_exact(const BinnedData& data, std::span<const GradientPair> gh,
                                      std::span<const std::size_t> rows, std::size_t f,
                                      NodeTotals node, const TreeParams& params) {
  const Matrix& X = data.X();
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
  // Group equal values so per-value sums accumulate in row order.
  std::vector<double> values, bg, bh;
  std::vector<std::size_t> bc;
  for (auto r : order) {
    const double x = X(r, f);
    if (values.empty() || x != values.back()) {
      values.push_back(x);
      bg.push_back(0.0);
      bh.push_back(0.0);
      bc.push_back(0);
    }
    bg.back() += gh[r].g;
    bh.back() += gh[r].h;
    ++bc.back();
  }
  return scan_buckets(static_cast<int>(f), bg, bh, bc, node, rows.size(), params,
                      [&](std::size_t b) { return data.threshold_after(f, values[b]); });
}

}  // namespace

SplitCandidate find_best_split(const BinnedData& data, std::span<const GradientPair> gh,
                               std::span<const std::size_t> rows,
                               std::span<const std::size_t> features, const TreeParams& params,
                               Execution exec) {
  const NodeTotals node = totals(gh, rows);
  std::vector<SplitCandidate> per_feature(features.size());
  const auto nf = static_cast<std::ptrdiff_t>(features.size());
  const bool parallel = exec == Execution::Parallel && features.size() > 1;
  if (params.method == SplitMethod::Histogram) {
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < nf; ++i)
      per_feature[static_cast<std::size_t>(i)] =
          best_for_feature_histogram(data, gh, rows, features[static_cast<std::size_t>(i)], node, params);
  } else {
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < nf; ++i)
      per_feature[static_cast<std::size_t>(i)] =
          best_for_feature_exact(data, gh, rows, features[static_cast<std::size_t>(i)], node, params);
  }
  // Ordered reduction: features arrive ascending, strict > keeps the lower index.
  SplitCandidate best;
  for (const auto& c : per_feature)
    if (c.valid() && (!best.valid() || c.gain > best.gain)) best = c;
  return best;
}

namespace {

class TreeGrower {
 public:
  TreeGrower(const BinnedData& data, std::span<const GradientPair> gh, const TreeParams& params,
             Rng* rng, Execution exec)
      : data_(data), gh_(gh), params_(params), rng_(rng), exec_(exec) {
    all_features_.resize(data.n_features());
    std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
  }

  RegressionTree grow(std::vector<std::size_t> rows) {
    build(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::vector<std::size_t> features_for_split() {
    const auto p = data_.n_features();
    if (params_.max_features == 0 || static_cast<std::size_t>(params_.max_features) >= p) return all_features_;
    if (rng_ == nullptr) throw ModelError("feature subsampling requires a random generator");
    auto f = rng_->sample_without_replacement(p, static_cast<std::size_t>(params_.max_features));
    std::sort(f.begin(), f.end());
    return f;
  }

  int build(std::vector<std::size_t> rows, int depth) {
    const NodeTotals t = totals(gh_, rows);
    const auto idx = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    const double denom = t.h + params_.reg_lambda;
    node.value = denom > 0.0 ? -t.g / denom : 0.0;
    node.cover = t.h;
    tree_.nodes.push_back(node);

    const bool depth_capped = params_.max_depth >= 0 && depth >= params_.max_depth;
    if (depth_capped || rows.size() < 2) return idx;
    const auto features = features_for_split();
    const SplitCandidate split = find_best_split(data_, gh_, rows, features, params_, exec_);
    if (!split.valid() || split.gain <= 0.0) return idx;

    std::vector<std::size_t> left, right;
    const auto f = static_cast<std::size_t>(split.feature);
    for (auto r : rows) (data_.X()(r, f) <= split.threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    auto& n = tree_.nodes[static_cast<std::size_t>(idx)];
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.gain = split.gain;
    n.left = l;
    n.right = r;
    return idx;
  }

  const BinnedData& data_;
  std::span<const GradientPair> gh_;
  const TreeParams& params_;
  Rng* rng_;
  Execution exec_;
  std::vector<std::size_t> all_features_;
  RegressionTree tree_;
};

void check_finite(std::span<const GradientPair> gh) {
  for (std::size_t i = 0; i < gh.size(); ++i)
    if (!std::isfinite(gh[i].g) || !std::isfinite(gh[i].h))
      throw ModelError("non-finite gradient at row " + std::to_string(i));
}

}  // namespace

RegressionTree grow_tree(const BinnedData& data, std::span<const GradientPair> gh,
                         std::vector<std::size_t> rows, const TreeParams& params, Rng* feature_rng,
                         Execution exec) {
  params.validate(data.n_features());
  if (rows.empty()) throw ModelError("cannot grow a tree on zero rows");
  return TreeGrower(data, gh, params, feature_rng, exec).grow(std::move(rows));
}

RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& params, Execution exec) {
  if (y.size() != X.rows()) throw ModelError("fit_tree: X and y row counts differ");
  std::vector<GradientPair> gh(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) throw ModelError("non-finite target at row " + std::to_string(i));
    gh[i] = {-y[i], 1.0};
  }
  const BinnedData data(X, params.n_bins);
  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Rng rng(0);
  return grow_tree(data, gh, std::move(rows), params, &rng, exec);
}

RegressionTree fit_tree_gradients(const Matrix& X, std::span<const GradientPair> gh,
                                  std::span<const double> weights, const TreeParams& params,
                                  Execution exec) {
  if (gh.size() != X.rows()) throw ModelError("fit_tree_gradients: X and gradient counts differ");
  check_finite(gh);
  std::vector<GradientPair> weighted(gh.begin(), gh.end());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < gh.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w <= 0.0) continue;
    weighted[i] = {gh[i].g * w, gh[i].h * w};
    rows.push_back(i);
  }
  const BinnedData data(X, params.n_bins);
  Rng rng(0);
  return grow_tree(data, weighted, std::move(rows), params, &rng, exec);
}

std::vector<double> gain_importance(std::span<const RegressionTree> trees, std::size_t n_features) {
  std::vector<double> imp(n_features, 0.0);
  for (const auto& t : trees)
    for (const auto& n : t.nodes)
      if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.gain;
  return imp;
}

}  // namespace wq
