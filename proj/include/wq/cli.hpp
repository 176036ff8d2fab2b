#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wq/features.hpp"
#include "wq/model.hpp"
#include "wq/shap.hpp"
#include "wq/tuner.hpp"

namespace wq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitRuntime = 4;

struct ShapSettings {
  bool enabled = true;
  ValueFunctionKind kind = ValueFunctionKind::Marginalize;
  std::size_t background_size = 256;
  // "all", "first:N", "sample:N" or a list such as "0,4,10-12".
  std::string rows = "sample:100";
  std::string dataset = "test";  // rows are drawn from "test" or "train"
  Family family = Family::LightGBM;
  std::size_t max_players = 15;
};

// One JSON file drives every command; relative paths resolve against the
// file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
  std::optional<std::filesystem::path> schema;
  std::optional<std::filesystem::path> sites;
  std::filesystem::path output_dir;
  int threads = 0;
  bool parallel = true;
  std::vector<int> strategies{1, 2, 3};
  CategoricalToggles features;
  CVConfig cv;
  std::vector<Family> families{Family::ElasticNet, Family::RandomForest, Family::XGBoost, Family::LightGBM, Family::MLP};
  std::map<std::string, HyperGrid> grids;  // by family key; absent -> default grid
  ShapSettings shap;

  Execution exec() const { return parallel ? Execution::Parallel : Execution::Serial; }
  HyperGrid grid_for(Family f) const;

  // Throws ConfigError (missing seed, unknown keys, bad values).
  static RunConfig from_json(const json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);
};

// Row indices selected by a spec string (see ShapSettings::rows), ascending.
std::vector<std::size_t> select_rows(const std::string& spec, std::size_t n_rows, std::uint64_t seed);

// Runs one command line (args[0] is the program name) and returns the exit code.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace wq
