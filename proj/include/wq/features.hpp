#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wq/date.hpp"
#include "wq/matrix.hpp"
#include "wq/panel.hpp"

namespace wq {

// Meteorological seasons: Dec-Feb Winter, Mar-May Spring, Jun-Aug Summer, Sep-Nov Fall.
enum class Season { Winter, Spring, Summer, Fall };

const char* season_name(Season s);
Season season_of_month(int month);

struct TemporalFeatures {
  int year = 0;
  int month = 0;
  int day = 0;
  int weekday = 0;  // Monday = 0
  int iso_week = 0;
  Season season = Season::Winter;
};

TemporalFeatures decompose_date(const Date& date);

// One binary column per vocabulary entry, in vocabulary order. An unseen label
// is an error; there is no catch-all bucket.
Matrix one_hot_encode(std::span<const std::string> values, std::span<const std::string> vocabulary);

struct StandardizationParams {
  std::vector<double> mean;
  std::vector<double> sd;  // sample sd; 0 marks a constant column
};

StandardizationParams fit_standardizer(const Matrix& train);
// z = (x - mean) / sd, with sd == 0 columns mapped to 0.
Matrix apply_standardizer(const StandardizationParams& params, const Matrix& data);
Matrix invert_standardizer(const StandardizationParams& params, const Matrix& z);

enum class Strategy { RawNumeric = 1, StandardizedNumeric = 2, StandardizedPlusCategorical = 3 };

struct CategoricalToggles {
  bool site = true;
  bool month = true;
  bool weekday = true;
  bool season = true;
  // Ordinal extras, off by default: the test period contains a year absent from training.
  bool year = false;
  bool day = false;
};

struct StrategyConfig {
  Strategy strategy = Strategy::RawNumeric;
  CategoricalToggles categorical;

  static StrategyConfig for_strategy(int number);
  bool needs_standardizer() const { return strategy != Strategy::RawNumeric; }
  // Throws ConfigError, e.g. strategy 3 without the site one-hot.
  void validate() const;
};

enum class ColumnKind { Numeric, OneHot };

// Columns that act as one player for Shapley attribution (a numeric column
// on its own, or a whole one-hot block).
struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> columns;
};

struct DesignMatrix {
  std::vector<std::string> column_names;
  std::vector<ColumnKind> kinds;
  std::vector<FeatureGroup> groups;
  Matrix X;
  std::vector<double> y;

  std::size_t n_rows() const { return X.rows(); }
  std::size_t n_cols() const { return X.cols(); }
};

// Site vocabulary defaults to the table's sites in order of first appearance;
// pass the training vocabulary when assembling a test design.
DesignMatrix assemble_design(const StackedTable& table, const StrategyConfig& cfg,
                             const StandardizationParams* params,
                             std::span<const std::string> site_vocabulary = {});

std::vector<std::string> site_vocabulary_of(const StackedTable& table);

}  // namespace wq
