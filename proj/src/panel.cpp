#include "wq/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <json.hpp>
#include <unordered_map>

#include "wq/csv.hpp"
#include "wq/error.hpp"

namespace wq {

using nlohmann::json;

PanelSchema PanelSchema::from_json_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("schema file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  PanelSchema s;
  try {
    s.date_column = j.value("date_column", s.date_column);
    s.site_column = j.value("site_column", s.site_column);
    s.target_column = j.value("target_column", s.target_column);
    s.target_name = j.value("target_name", s.target_name);
    for (const auto& f : j.at("features")) {
      if (f.is_string()) {
        s.features.push_back({f.get<std::string>(), f.get<std::string>()});
      } else {
        s.features.push_back({f.at("column").get<std::string>(), f.at("name").get<std::string>()});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError("schema " + path.string() + ": " + e.what());
  }
  if (s.features.empty()) throw ConfigError("schema " + path.string() + " lists no feature columns");
  return s;
}

PanelSchema PanelSchema::simple(std::size_t n_features) {
  PanelSchema s;
  for (std::size_t i = 1; i <= n_features; ++i) {
    const auto name = "X" + std::to_string(i);
    s.features.push_back({name, name});
  }
  return s;
}

PanelDataset::PanelDataset(std::vector<Date> dates, std::vector<std::string> site_ids,
                           std::vector<std::string> feature_names, std::vector<double> features,
                           std::vector<double> targets, std::string target_name)
    : dates_(std::move(dates)),
      site_ids_(std::move(site_ids)),
      feature_names_(std::move(feature_names)),
      features_(std::move(features)),
      targets_(std::move(targets)),
      target_name_(std::move(target_name)) {
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (!(dates_[i - 1] < dates_[i]))
      throw DataError("panel dates must be strictly increasing; " + dates_[i - 1].to_string() +
                      " is followed by " + dates_[i].to_string());
  }
  const std::size_t cells = dates_.size() * site_ids_.size();
  if (features_.size() != cells * feature_names_.size())
    throw DataError("feature tensor has " + std::to_string(features_.size()) + " entries, expected " +
                    std::to_string(cells * feature_names_.size()));
  if (targets_.size() != cells)
    throw DataError("target matrix has " + std::to_string(targets_.size()) + " entries, expected " +
                    std::to_string(cells));
}

namespace {

double parse_value(const std::string& text, std::size_t line, const std::string& column) {
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan" || text == "null")
    return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size())
    throw DataError("line " + std::to_string(line) + ", column '" + column +
                    "': cannot parse number '" + text + "'");
  return v;
}

}  // namespace

PanelDataset load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
  const CsvTable csv = read_csv(path);
  const std::size_t date_col = csv.column_index(schema.date_column);
  const std::size_t site_col = csv.column_index(schema.site_column);
  const std::size_t target_col = csv.column_index(schema.target_column);
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (const auto& f : schema.features) {
    feature_cols.push_back(csv.column_index(f.source));
    feature_names.push_back(f.name);
  }
  const std::size_t p = feature_cols.size();

  struct Record {
    Date date;
    std::string site;
    std::vector<double> x;
    double y;
    std::size_t line;
  };
  std::vector<Record> records;
  records.reserve(csv.rows.size());
  std::vector<std::string> sites;
  std::unordered_map<std::string, std::size_t> site_index;
  std::map<Date, std::size_t> date_index;

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::size_t line = csv.line_numbers[r];
    if (row.size() != csv.header.size())
      throw DataError(path.string() + " line " + std::to_string(line) + ": expected " +
                      std::to_string(csv.header.size()) + " fields, found " +
                      std::to_string(row.size()));
    Record rec;
    try {
      rec.date = Date::parse(row[date_col]);
    } catch (const DataError& e) {
      throw DataError(path.string() + " line " + std::to_string(line) + ": " + e.what());
    }
    rec.site = row[site_col];
    rec.line = line;
    rec.x.resize(p);
    for (std::size_t f = 0; f < p; ++f) rec.x[f] = parse_value(row[feature_cols[f]], line, feature_names[f]);
    rec.y = parse_value(row[target_col], line, schema.target_name);
    if (site_index.emplace(rec.site, sites.size()).second) sites.push_back(rec.site);
    date_index.emplace(rec.date, 0);
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw DataError(path.string() + ": no data rows");

  std::vector<Date> dates;
  for (auto& [d, idx] : date_index) {
    idx = dates.size();
    dates.push_back(d);
  }
  const std::size_t n = dates.size();
  const std::size_t k = sites.size();
  std::vector<double> features(n * k * p);
  std::vector<double> targets(n * k);
  std::vector<std::size_t> seen_line(n * k, 0);
  for (const auto& rec : records) {
    const std::size_t cell = date_index.at(rec.date) * k + site_index.at(rec.site);
    if (seen_line[cell] != 0)
      throw DataError(path.string() + ": duplicate (date, site) pair (" + rec.date.to_string() +
                      ", " + rec.site + ") on lines " + std::to_string(seen_line[cell]) + " and " +
                      std::to_string(rec.line));
    seen_line[cell] = rec.line;
    std::copy(rec.x.begin(), rec.x.end(), features.begin() + static_cast<std::ptrdiff_t>(cell * p));
    targets[cell] = rec.y;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (seen_line[i * k + j] == 0)
        throw DataError(path.string() + ": incomplete panel, missing (date, site) pair (" +
                        dates[i].to_string() + ", " + sites[j] + ")");

  return PanelDataset(std::move(dates), std::move(sites), std::move(feature_names),
                      std::move(features), std::move(targets), schema.target_name);
}

std::vector<SiteInfo> load_sites(const std::filesystem::path& path) {
  const CsvTable csv = read_csv(path);
  const std::size_t id = csv.column_index("site_id");
  std::optional<std::size_t> group;
  for (std::size_t i = 0; i < csv.header.size(); ++i)
    if (csv.header[i] == "group") group = i;
  std::vector<SiteInfo> out;
  for (const auto& row : csv.rows) out.push_back({row.at(id), group ? row.at(*group) : ""});
  return out;
}

// Cache layout: magic, then counts, strings (u64 length + bytes), dates (3 x i32), doubles.
namespace {

constexpr char kCacheMagic[8] = {'W', 'Q', 'P', 'A', 'N', 'E', 'L', '1'};

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
void put_string(std::ofstream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated panel cache");
  return v;
}
std::string get_string(std::ifstream& in) {
  const auto n = get<std::uint64_t>(in);
  if (n > (1u << 20)) throw DataError("corrupt panel cache");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("truncated panel cache");
  return s;
}

}  // namespace

void save_panel_cache(const PanelDataset& ds, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write panel cache " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put<std::uint64_t>(out, ds.n_dates());
  put<std::uint64_t>(out, ds.n_sites());
  put<std::uint64_t>(out, ds.n_features());
  put_string(out, ds.target_name());
  for (const auto& d : ds.dates()) {
    put<std::int32_t>(out, d.year);
    put<std::int32_t>(out, d.month);
    put<std::int32_t>(out, d.day);
  }
  for (const auto& s : ds.site_ids()) put_string(out, s);
  for (const auto& f : ds.feature_names()) put_string(out, f);
  for (double v : ds.raw_features()) put(out, v);
  for (double v : ds.raw_targets()) put(out, v);
}

PanelDataset load_panel_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open panel cache " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
    throw DataError(path.string() + " is not a panel cache");
  const auto n = get<std::uint64_t>(in);
  const auto k = get<std::uint64_t>(in);
  const auto p = get<std::uint64_t>(in);
  auto target_name = get_string(in);
  std::vector<Date> dates(n);
  for (auto& d : dates) {
    d.year = get<std::int32_t>(in);
    d.month = get<std::int32_t>(in);
    d.day = get<std::int32_t>(in);
  }
  std::vector<std::string> sites(k), names(p);
  for (auto& s : sites) s = get_string(in);
  for (auto& s : names) s = get_string(in);
  std::vector<double> features(n * k * p), targets(n * k);
  for (auto& v : features) v = get<double>(in);
  for (auto& v : targets) v = get<double>(in);
  return PanelDataset(std::move(dates), std::move(sites), std::move(names), std::move(features),
                      std::move(targets), std::move(target_name));
}

std::size_t ValidationReport::total_non_finite() const {
  std::size_t total = 0;
  for (auto c : non_finite_counts) total += c;
  return total;
}

std::string ValidationReport::to_json() const {
  auto cells = [](const std::vector<CellIssue>& issues) {
    json arr = json::array();
    for (const auto& c : issues) {
      json v = std::isfinite(c.value) ? json(c.value) : json(format_double(c.value));
      arr.push_back({{"date", c.date.to_string()}, {"site", c.site_id}, {"column", c.column}, {"value", v}});
    }
    return arr;
  };
  json counts = json::object();
  for (std::size_t i = 0; i < columns.size(); ++i) counts[columns[i]] = non_finite_counts[i];
  json j = {{"passed", passed},
            {"total_non_finite", total_non_finite()},
            {"non_finite_counts", counts},
            {"non_finite_cells", cells(non_finite_cells)},
            {"range_warnings", cells(range_warnings)}};
  return j.dump(2) + "\n";
}

ValidationReport validate_panel(const PanelDataset& ds) {
  ValidationReport report;
  report.columns = ds.feature_names();
  report.columns.push_back(ds.target_name());
  report.non_finite_counts.assign(report.columns.size(), 0);
  const std::size_t p = ds.n_features();
  for (std::size_t i = 0; i < ds.n_dates(); ++i) {
    for (std::size_t j = 0; j < ds.n_sites(); ++j) {
      for (std::size_t f = 0; f <= p; ++f) {
        const double v = f < p ? ds.feature(i, j, f) : ds.target(i, j);
        if (!std::isfinite(v)) {
          ++report.non_finite_counts[f];
          report.non_finite_cells.push_back({ds.dates()[i], ds.site_ids()[j], report.columns[f], v});
        } else if (f < p && (v < 0.0 || v > 1.0)) {
          report.range_warnings.push_back({ds.dates()[i], ds.site_ids()[j], report.columns[f], v});
        }
      }
    }
  }
  report.passed = report.total_non_finite() == 0;
  return report;
}

std::vector<double> StackedTable::column(const std::string& name) const {
  if (name == target_name) return targets;
  for (std::size_t f = 0; f < feature_names.size(); ++f)
    if (feature_names[f] == name) return features.column(f);
  throw DataError("stacked table has no column '" + name + "'");
}

std::vector<std::string> StackedTable::numeric_columns() const {
  auto cols = feature_names;
  cols.push_back(target_name);
  return cols;
}

StackedTable stack_panel(const PanelDataset& ds) {
  StackedTable t;
  const std::size_t n = ds.n_dates(), k = ds.n_sites(), p = ds.n_features();
  t.feature_names = ds.feature_names();
  t.target_name = ds.target_name();
  t.dates.reserve(n * k);
  t.site_ids.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      t.dates.push_back(ds.dates()[i]);
      t.site_ids.push_back(ds.site_ids()[j]);
    }
  auto raw = ds.raw_features();
  t.features = Matrix(n * k, p, std::vector<double>(raw.begin(), raw.end()));
  auto y = ds.raw_targets();
  t.targets.assign(y.begin(), y.end());
  return t;
}

PanelDataset unstack(const StackedTable& table) {
  std::map<Date, std::size_t> date_index;
  std::vector<std::string> sites;
  std::unordered_map<std::string, std::size_t> site_index;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    date_index.emplace(table.dates[r], 0);
    if (site_index.emplace(table.site_ids[r], sites.size()).second) sites.push_back(table.site_ids[r]);
  }
  std::vector<Date> dates;
  for (auto& [d, idx] : date_index) {
    idx = dates.size();
    dates.push_back(d);
  }
  const std::size_t k = sites.size(), p = table.feature_names.size();
  if (dates.size() * k != table.row_count())
    throw DataError("stacked table is not a complete date x site grid");
  std::vector<double> features(table.row_count() * p);
  std::vector<double> targets(table.row_count());
  std::vector<bool> seen(table.row_count(), false);
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const std::size_t cell = date_index.at(table.dates[r]) * k + site_index.at(table.site_ids[r]);
    if (seen[cell])
      throw DataError("duplicate (date, site) pair (" + table.dates[r].to_string() + ", " +
                      table.site_ids[r] + ")");
    seen[cell] = true;
    auto src = table.features.row(r);
    std::copy(src.begin(), src.end(), features.begin() + static_cast<std::ptrdiff_t>(cell * p));
    targets[cell] = table.targets[r];
  }
  return PanelDataset(std::move(dates), std::move(sites), table.feature_names, std::move(features),
                      std::move(targets), table.target_name);
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("percentile of an empty column");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

ColumnSummary summarize_column(std::string name, std::span<const double> values) {
  if (values.empty()) throw DataError("cannot summarize empty column '" + name + "'");
  ColumnSummary s;
  s.name = std::move(name);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // Sum in sorted order so the result does not depend on row order.
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(sorted.size());
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.sd = sorted.size() > 1 ? std::sqrt(ss / static_cast<double>(sorted.size() - 1)) : 0.0;
  s.min = sorted.front();
  s.max = sorted.back();
  s.q25 = percentile(sorted, 0.25);
  s.q50 = percentile(sorted, 0.50);
  s.q75 = percentile(sorted, 0.75);
  return s;
}

SummaryStats summarize(const StackedTable& table) {
  if (table.row_count() == 0) throw DataError("cannot summarize an empty table");
  SummaryStats stats;
  for (std::size_t f = 0; f < table.feature_names.size(); ++f)
    stats.columns.push_back(summarize_column(table.feature_names[f], table.features.column(f)));
  stats.columns.push_back(summarize_column(table.target_name, table.targets));
  return stats;
}

std::string SummaryStats::to_csv() const {
  std::string out = "statistic";
  for (const auto& c : columns) out += "," + csv_escape(c.name);
  out += "\n";
  auto line = [&](const char* label, double ColumnSummary::*field) {
    out += label;
    for (const auto& c : columns) out += "," + format_fixed(c.*field, 6);
    out += "\n";
  };
  line("mean", &ColumnSummary::mean);
  line("sd", &ColumnSummary::sd);
  line("min", &ColumnSummary::min);
  line("25%", &ColumnSummary::q25);
  line("50%", &ColumnSummary::q50);
  line("75%", &ColumnSummary::q75);
  line("max", &ColumnSummary::max);
  return out;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix correlation_matrix(const StackedTable& table, std::vector<std::string> columns) {
  if (table.row_count() < 2) throw DataError("correlation needs at least 2 rows");
  if (columns.empty()) columns = table.feature_names;
  CorrelationMatrix cm;
  cm.labels = columns;
  std::vector<std::vector<double>> data;
  for (const auto& c : columns) data.push_back(table.column(c));
  const std::size_t m = columns.size();
  cm.values = Matrix(m, m);
  std::vector<bool> constant(m);
  for (std::size_t a = 0; a < m; ++a) {
    const auto [lo, hi] = std::minmax_element(data[a].begin(), data[a].end());
    constant[a] = *lo == *hi;
    if (constant[a]) cm.warnings.push_back("column '" + columns[a] + "' has zero variance; its correlations are reported as 0");
  }
  for (std::size_t a = 0; a < m; ++a) {
    cm.values(a, a) = 1.0;
    for (std::size_t b = a + 1; b < m; ++b) {
      const double r = constant[a] || constant[b] ? 0.0 : pearson(data[a], data[b]);
      cm.values(a, b) = r;
      cm.values(b, a) = r;
    }
  }
  return cm;
}

std::string CorrelationMatrix::to_csv() const {
  std::string out = "column";
  for (const auto& l : labels) out += "," + csv_escape(l);
  out += "\n";
  for (std::size_t a = 0; a < labels.size(); ++a) {
    out += csv_escape(labels[a]);
    for (std::size_t b = 0; b < labels.size(); ++b) out += "," + format_fixed(values(a, b), 6);
    out += "\n";
  }
  return out;
}

}  // namespace wq
