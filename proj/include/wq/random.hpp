#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace wq {

// Derives an independent sub-seed for a named component ("folds", "bootstrap", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Seeded generator whose output sequence is fixed across platforms. The std
// distributions are implementation-defined, so the helpers below are spelled out.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform integer in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n);
  // Uniform double in [0, 1).
  double uniform01();
  double normal();

  // Uniform permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);
  // k distinct indices from 0..n-1, in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wq
