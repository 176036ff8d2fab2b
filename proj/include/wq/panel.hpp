#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wq/date.hpp"
#include "wq/matrix.hpp"

namespace wq {

// Maps CSV column headers (the long USGS names) onto short names X1..Xp, Y.
struct FeatureColumn {
  std::string source;  // header in the CSV
  std::string name;    // simplified name
};

struct PanelSchema {
  std::string date_column = "date";
  std::string site_column = "site_id";
  std::vector<FeatureColumn> features;
  std::string target_column = "Y";
  std::string target_name = "Y";

  static PanelSchema from_json_file(const std::filesystem::path& path);
  // Schema whose CSV headers already are the short names.
  static PanelSchema simple(std::size_t n_features);
};

// dates x sites x features tensor plus a dates x sites target matrix.
class PanelDataset {
 public:
  PanelDataset(std::vector<Date> dates, std::vector<std::string> site_ids,
               std::vector<std::string> feature_names, std::vector<double> features,
               std::vector<double> targets, std::string target_name = "Y");

  std::size_t n_dates() const { return dates_.size(); }
  std::size_t n_sites() const { return site_ids_.size(); }
  std::size_t n_features() const { return feature_names_.size(); }

  const std::vector<Date>& dates() const { return dates_; }
  const std::vector<std::string>& site_ids() const { return site_ids_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const std::string& target_name() const { return target_name_; }

  double feature(std::size_t date, std::size_t site, std::size_t f) const {
    return features_[(date * n_sites() + site) * n_features() + f];
  }
  double target(std::size_t date, std::size_t site) const {
    return targets_[date * n_sites() + site];
  }
  std::span<const double> raw_features() const { return features_; }
  std::span<const double> raw_targets() const { return targets_; }

  friend bool operator==(const PanelDataset&, const PanelDataset&) = default;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> site_ids_;
  std::vector<std::string> feature_names_;
  std::vector<double> features_;
  std::vector<double> targets_;
  std::string target_name_;
};

PanelDataset load_panel(const std::filesystem::path& path, const PanelSchema& schema);

struct SiteInfo {
  std::string site_id;
  std::string group;
};
// Optional metadata file with columns site_id,group.
std::vector<SiteInfo> load_sites(const std::filesystem::path& path);

void save_panel_cache(const PanelDataset& ds, const std::filesystem::path& path);
PanelDataset load_panel_cache(const std::filesystem::path& path);

struct CellIssue {
  Date date;
  std::string site_id;
  std::string column;
  double value = 0.0;
};

struct ValidationReport {
  std::vector<std::string> columns;
  std::vector<std::size_t> non_finite_counts;  // per column, features then target
  std::vector<CellIssue> non_finite_cells;
  std::vector<CellIssue> range_warnings;  // features outside [0, 1]; never fail
  bool passed = true;

  std::size_t total_non_finite() const;
  std::string to_json() const;
};

ValidationReport validate_panel(const PanelDataset& ds);

// One row per (date, site), date-major.
struct StackedTable {
  std::vector<Date> dates;
  std::vector<std::string> site_ids;
  std::vector<std::string> feature_names;
  std::string target_name = "Y";
  Matrix features;  // row_count x p
  std::vector<double> targets;

  std::size_t row_count() const { return targets.size(); }
  // Column by name (a feature or the target).
  std::vector<double> column(const std::string& name) const;
  std::vector<std::string> numeric_columns() const;
};

StackedTable stack_panel(const PanelDataset& ds);
// Groups a stacked table back into a panel. Requires a complete date x site grid.
PanelDataset unstack(const StackedTable& table);

struct ColumnSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

struct SummaryStats {
  std::vector<ColumnSummary> columns;
  // Table-3 style: statistics as rows, columns as columns.
  std::string to_csv() const;
};

// Percentile with linear interpolation between closest ranks, q in [0, 1].
double percentile(std::span<const double> sorted, double q);
ColumnSummary summarize_column(std::string name, std::span<const double> values);
SummaryStats summarize(const StackedTable& table);

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Matrix values;
  std::vector<std::string> warnings;

  std::string to_csv() const;
};

double pearson(std::span<const double> x, std::span<const double> y);
// Empty `columns` selects every feature column (the target is excluded).
CorrelationMatrix correlation_matrix(const StackedTable& table,
                                     std::vector<std::string> columns = {});

}  // namespace wq
