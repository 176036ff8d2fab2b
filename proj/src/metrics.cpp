#include "wq/metrics.hpp"

#include <cmath>
#include <string>

#include "wq/error.hpp"

namespace wq {

MetricReport evaluate(std::span<const double> y, std::span<const double> yhat, double division_guard) {
  if (y.size() != yhat.size())
    throw ModelError("evaluate: " + std::to_string(y.size()) + " observations vs " +
                     std::to_string(yhat.size()) + " predictions");
  if (y.empty()) throw ModelError("evaluate: empty input");
  const double n = static_cast<double>(y.size());
  double sse = 0.0, ape = 0.0, abs_err = 0.0, abs_y = 0.0, sum_y = 0.0, under = 0.0, over = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    sse += e * e;
    if (std::abs(y[i]) <= division_guard)
      throw ModelError("MAPE undefined: |y| at index " + std::to_string(i) + " is within the division guard");
    ape += std::abs(e / y[i]);
    abs_err += std::abs(e);
    abs_y += std::abs(y[i]);
    sum_y += y[i];
    if (y[i] > yhat[i]) under += e;
    if (y[i] < yhat[i]) over += -e;
  }
  if (abs_y <= division_guard) throw ModelError("WMAPE undefined: sum |y| is within the division guard");
  if (std::abs(sum_y) <= division_guard)
    throw ModelError("WUPRED/WOPRED undefined: sum y is within the division guard");
  MetricReport r;
  r.n = y.size();
  r.rmse = std::sqrt(sse / n);
  r.mape = ape / n;
  r.wmape = abs_err / abs_y;
  r.wupred = under / sum_y;
  r.wopred = over / sum_y;
  return r;
}

double score(std::span<const double> y, std::span<const double> yhat) { return -evaluate(y, yhat).rmse; }

BenchmarkModel fit_benchmark(std::span<const double> train_y) {
  if (train_y.empty()) throw ModelError("benchmark: empty training targets");
  double s = 0.0;
  for (double v : train_y) s += v;
  return {s / static_cast<double>(train_y.size())};
}

}  // namespace wq
