#pragma once

// Shared fixtures for the unit tests. Nothing here calls into the library's
// algorithms: the oracles are written independently so the tests can catch
// errors in the code under test.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "wq/matrix.hpp"

namespace wq::test {

// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wq_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Matrix random_matrix(std::mt19937_64& gen, std::size_t n, std::size_t p, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(n, p);
  for (auto& v : m.data()) v = u(gen);
  return m;
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// --- calendar oracle: walk the calendar one year / month at a time ----------

inline bool oracle_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

inline long oracle_days_since_epoch(int y, int m, int d) {
  static const int len[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  long days = 0;
  for (int yy = 1970; yy < y; ++yy) days += oracle_leap(yy) ? 366 : 365;
  for (int yy = y; yy < 1970; ++yy) days -= oracle_leap(yy) ? 366 : 365;
  for (int mm = 1; mm < m; ++mm) days += len[mm - 1] + (mm == 2 && oracle_leap(y) ? 1 : 0);
  return days + d - 1;
}

// Zeller's congruence, converted to Monday = 0.
inline int oracle_weekday(int y, int m, int d) {
  if (m < 3) {
    m += 12;
    y -= 1;
  }
  const int k = y % 100, j = y / 100;
  const int h = (d + 13 * (m + 1) / 5 + k + k / 4 + j / 4 + 5 * j) % 7;  // 0 = Saturday
  return (h + 5) % 7;
}

// --- metrics oracle ------------------------------------------------------------

struct OracleMetrics {
  double rmse, mape, wmape, wupred, wopred;
};

inline OracleMetrics oracle_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
  long double sq = 0, ape = 0, ae = 0, sy = 0, sabs = 0, under = 0, over = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double e = static_cast<long double>(y[i]) - yhat[i];
    sq += e * e;
    ape += std::fabs(e / y[i]);
    ae += std::fabs(e);
    sy += y[i];
    sabs += std::fabs(static_cast<long double>(y[i]));
    if (y[i] > yhat[i]) under += e;
    if (y[i] < yhat[i]) over += -e;
  }
  const long double n = static_cast<long double>(y.size());
  return {static_cast<double>(std::sqrt(sq / n)), static_cast<double>(ape / n), static_cast<double>(ae / sabs),
          static_cast<double>(under / sy), static_cast<double>(over / sy)};
}

// --- Shapley oracle: average marginal contribution over all orderings --------

inline std::vector<double> shapley_by_permutations(std::size_t m, const std::function<double(std::uint64_t)>& v) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> phi(m, 0.0);
  double count = 0;
  do {
    std::uint64_t mask = 0;
    for (auto i : order) {
      const double before = v(mask);
      mask |= std::uint64_t{1} << i;
      phi[i] += v(mask) - before;
    }
    count += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  for (auto& p : phi) p /= count;
  return phi;
}

// --- exhaustive variance-reduction split ----------------------------------------

struct OracleSplit {
  std::size_t feature = 0;
  double lo = 0.0;  // largest value routed left
  double hi = 0.0;  // smallest value routed right
  double sse_reduction = -1.0;
};

inline OracleSplit oracle_best_split(const Matrix& X, const std::vector<double>& y) {
  auto sse = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s;
  };
  const double total = sse(y);
  OracleSplit best;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::vector<double> vals = X.column(f);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      std::vector<double> l, r;
      for (std::size_t i = 0; i < X.rows(); ++i) (X(i, f) <= vals[k] ? l : r).push_back(y[i]);
      const double red = total - sse(l) - sse(r);
      if (red > best.sse_reduction + 1e-12) best = {f, vals[k], vals[k + 1], red};
    }
  }
  return best;
}

}  // namespace wq::test
