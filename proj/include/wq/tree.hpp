#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "wq/matrix.hpp"
#include "wq/parallel.hpp"
#include "wq/random.hpp"

namespace wq {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double cover = 0.0;  // hessian (weighted sample) sum at the node
  double gain = 0.0;   // split gain, internal nodes only

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Binary regression tree; x[feature] <= threshold routes left.
struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  // Index of the leaf reached by x.
  int leaf_index(std::span<const double> x) const;
  std::size_t leaf_count() const;
  int depth() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct GradientPair {
  double g = 0.0;
  double h = 0.0;
};

enum class SplitMethod {
  Histogram,  // bins fixed at fit start from training quantiles
  Exact,      // sort node rows per feature; reference for the histogram kernel
};

struct TreeParams {
  int max_depth = 6;  // negative = unlimited
  double min_child_weight = 1.0;
  double reg_lambda = 0.0;
  double gamma = 0.0;
  int n_bins = 256;
  SplitMethod method = SplitMethod::Histogram;
  int max_features = 0;  // features tried per split; 0 = all

  void validate(std::size_t n_features) const;
};

// Per-feature split thresholds and row bin indices, computed once per fit.
// A feature with at most n_bins distinct values gets one bin per value.
class BinnedData {
 public:
  BinnedData(const Matrix& X, int n_bins);

  const Matrix& X() const { return *X_; }
  std::size_t n_features() const { return thresholds_.size(); }
  // thresholds(f)[b] is the upper boundary of bin b; the last bin is open.
  std::span<const double> thresholds(std::size_t f) const { return thresholds_[f]; }
  std::size_t n_bins(std::size_t f) const { return thresholds_[f].size() + 1; }
  std::uint32_t bin(std::size_t row, std::size_t f) const { return bins_[row * n_features() + f]; }
  // Sorted distinct training values of a feature.
  std::span<const double> distinct(std::size_t f) const { return distinct_[f]; }
  // Midpoint between v and the next larger training value of feature f.
  double threshold_after(std::size_t f, double v) const;

 private:
  const Matrix* X_;
  std::vector<std::vector<double>> thresholds_;
  std::vector<std::vector<double>> distinct_;
  std::vector<std::uint32_t> bins_;
};

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
  double left_g = 0.0;
  double left_h = 0.0;

  bool valid() const { return feature >= 0; }
};

// Regularized split gain
//   1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)] - gamma,
// with rounding-level positive values on the bracket flushed to zero.
double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma);

// Best split over `features` for the node holding `rows` (ascending order).
// gh is indexed by row and already carries sample weights. Ties resolve to the
// lower feature index, then the lower threshold. Serial and Parallel give
// identical results.
SplitCandidate find_best_split(const BinnedData& data, std::span<const GradientPair> gh,
                               std::span<const std::size_t> rows,
                               std::span<const std::size_t> features, const TreeParams& params,
                               Execution exec = Execution::Parallel);

// Grows a tree on the rows listed (ascending, weight folded into gh).
// feature_rng is required when params.max_features samples a subset.
RegressionTree grow_tree(const BinnedData& data, std::span<const GradientPair> gh,
                         std::vector<std::size_t> rows, const TreeParams& params,
                         Rng* feature_rng = nullptr, Execution exec = Execution::Parallel);

// Raw-target CART: variance-reduction splits and mean leaves.
RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& params,
                        Execution exec = Execution::Parallel);

// Gradient mode. weights may be empty (all ones).
RegressionTree fit_tree_gradients(const Matrix& X, std::span<const GradientPair> gh,
                                  std::span<const double> weights, const TreeParams& params,
                                  Execution exec = Execution::Parallel);

// Total split gain per feature.
std::vector<double> gain_importance(std::span<const RegressionTree> trees, std::size_t n_features);

}  // namespace wq
