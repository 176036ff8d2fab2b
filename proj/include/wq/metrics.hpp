#pragma once

#include <span>
#include <vector>

namespace wq {

struct MetricReport {
  double rmse = 0.0;
  double mape = 0.0;
  double wmape = 0.0;
  double wupred = 0.0;  // under-prediction mass / sum y
  double wopred = 0.0;  // over-prediction mass / sum y
  std::size_t n = 0;
};

inline constexpr double kDivisionGuard = 1e-12;

// Throws ModelError on length mismatch or when a denominator is within the guard,
// naming the metric (and the row for MAPE).
MetricReport evaluate(std::span<const double> y, std::span<const double> yhat,
                      double division_guard = kDivisionGuard);

// -RMSE; higher is better.
double score(std::span<const double> y, std::span<const double> yhat);

struct BenchmarkModel {
  double constant = 0.0;

  std::vector<double> predict(std::size_t n_rows) const { return std::vector<double>(n_rows, constant); }
};

BenchmarkModel fit_benchmark(std::span<const double> train_y);

}  // namespace wq
