#include "wq/features.hpp"

#include <cmath>
#include <unordered_map>

#include "wq/error.hpp"

namespace wq {

const char* season_name(Season s) {
  switch (s) {
    case Season::Winter: return "Winter";
    case Season::Spring: return "Spring";
    case Season::Summer: return "Summer";
    case Season::Fall: return "Fall";
  }
  return "?";
}

Season season_of_month(int month) {
  if (month == 12 || month <= 2) return Season::Winter;
  if (month <= 5) return Season::Spring;
  if (month <= 8) return Season::Summer;
  return Season::Fall;
}

namespace {

int weekday_of(std::int64_t days) {
  // 1970-01-01 was a Thursday (3 with Monday = 0).
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

}  // namespace

TemporalFeatures decompose_date(const Date& date) {
  TemporalFeatures t;
  t.year = date.year;
  t.month = date.month;
  t.day = date.day;
  const auto days = date.days_since_epoch();
  t.weekday = weekday_of(days);
  // ISO week: the week containing this date's Thursday, counted in that Thursday's year.
  const Date thursday = Date::from_days(days + 3 - t.weekday);
  const auto jan1 = Date{thursday.year, 1, 1}.days_since_epoch();
  t.iso_week = static_cast<int>((thursday.days_since_epoch() - jan1) / 7 + 1);
  t.season = season_of_month(date.month);
  return t;
}

Matrix one_hot_encode(std::span<const std::string> values, std::span<const std::string> vocabulary) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < vocabulary.size(); ++i) index.emplace(vocabulary[i], i);
  Matrix out(values.size(), vocabulary.size());
  for (std::size_t r = 0; r < values.size(); ++r) {
    auto it = index.find(values[r]);
    if (it == index.end()) throw DataError("unseen category label '" + values[r] + "'");
    out(r, it->second) = 1.0;
  }
  return out;
}

StandardizationParams fit_standardizer(const Matrix& train) {
  if (train.rows() < 2) throw DataError("standardizer needs at least 2 training rows");
  StandardizationParams p;
  const double n = static_cast<double>(train.rows());
  p.mean.assign(train.cols(), 0.0);
  p.sd.assign(train.cols(), 0.0);
  for (std::size_t r = 0; r < train.rows(); ++r)
    for (std::size_t c = 0; c < train.cols(); ++c) p.mean[c] += train(r, c);
  for (auto& m : p.mean) m /= n;
  for (std::size_t r = 0; r < train.rows(); ++r)
    for (std::size_t c = 0; c < train.cols(); ++c) {
      const double d = train(r, c) - p.mean[c];
      p.sd[c] += d * d;
    }
  for (std::size_t c = 0; c < train.cols(); ++c) {
    bool constant = true;
    for (std::size_t r = 1; r < train.rows() && constant; ++r) constant = train(r, c) == train(0, c);
    p.sd[c] = constant ? 0.0 : std::sqrt(p.sd[c] / (n - 1.0));
  }
  return p;
}

Matrix apply_standardizer(const StandardizationParams& params, const Matrix& data) {
  if (data.cols() != params.mean.size())
    throw DataError("standardizer fitted on " + std::to_string(params.mean.size()) +
                    " columns, applied to " + std::to_string(data.cols()));
  Matrix out(data.rows(), data.cols());
  for (std::size_t r = 0; r < data.rows(); ++r)
    for (std::size_t c = 0; c < data.cols(); ++c)
      out(r, c) = params.sd[c] > 0.0 ? (data(r, c) - params.mean[c]) / params.sd[c] : 0.0;
  return out;
}

Matrix invert_standardizer(const StandardizationParams& params, const Matrix& z) {
  if (z.cols() != params.mean.size()) throw DataError("standardizer width mismatch");
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) out(r, c) = z(r, c) * params.sd[c] + params.mean[c];
  return out;
}

StrategyConfig StrategyConfig::for_strategy(int number) {
  if (number < 1 || number > 3) throw ConfigError("strategy must be 1, 2 or 3 (got " + std::to_string(number) + ")");
  StrategyConfig cfg;
  cfg.strategy = static_cast<Strategy>(number);
  return cfg;
}

void StrategyConfig::validate() const {
  if (strategy == Strategy::StandardizedPlusCategorical && !categorical.site)
    throw ConfigError("strategy 3 requires the site one-hot encoding");
}

std::vector<std::string> site_vocabulary_of(const StackedTable& table) {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, bool> seen;
  for (const auto& s : table.site_ids)
    if (seen.emplace(s, true).second) vocab.push_back(s);
  return vocab;
}

DesignMatrix assemble_design(const StackedTable& table, const StrategyConfig& cfg,
                             const StandardizationParams* params,
                             std::span<const std::string> site_vocabulary) {
  cfg.validate();
  const std::size_t n = table.row_count();
  const std::size_t p = table.feature_names.size();
  DesignMatrix d;
  d.y = table.targets;

  Matrix numeric = table.features;
  if (cfg.needs_standardizer()) {
    if (params == nullptr) throw ConfigError("strategy " + std::to_string(static_cast<int>(cfg.strategy)) +
                                             " requires standardization parameters fitted on training rows");
    numeric = apply_standardizer(*params, numeric);
  }

  std::vector<Matrix> blocks;
  blocks.push_back(numeric);
  for (std::size_t f = 0; f < p; ++f) {
    d.column_names.push_back(table.feature_names[f]);
    d.kinds.push_back(ColumnKind::Numeric);
    d.groups.push_back({table.feature_names[f], {f}});
  }
  std::size_t next_col = p;

  auto add_numeric = [&](const std::string& name, const std::vector<double>& values) {
    blocks.emplace_back(n, 1, values);
    d.column_names.push_back(name);
    d.kinds.push_back(ColumnKind::Numeric);
    d.groups.push_back({name, {next_col++}});
  };
  auto add_one_hot = [&](const std::string& group, const std::vector<std::string>& labels,
                         std::span<const std::string> vocab) {
    blocks.push_back(one_hot_encode(labels, vocab));
    FeatureGroup g{group, {}};
    for (const auto& v : vocab) {
      d.column_names.push_back(group + "=" + v);
      d.kinds.push_back(ColumnKind::OneHot);
      g.columns.push_back(next_col++);
    }
    d.groups.push_back(std::move(g));
  };

  if (cfg.strategy == Strategy::StandardizedPlusCategorical) {
    std::vector<TemporalFeatures> tf;
    tf.reserve(n);
    for (const auto& date : table.dates) tf.push_back(decompose_date(date));
    const auto& toggles = cfg.categorical;
    if (toggles.year || toggles.day) {
      std::vector<double> year(n), day(n);
      for (std::size_t r = 0; r < n; ++r) {
        year[r] = tf[r].year;
        day[r] = tf[r].day;
      }
      if (toggles.year) add_numeric("year", year);
      if (toggles.day) add_numeric("day", day);
    }
    if (toggles.site) {
      const std::vector<std::string> vocab = site_vocabulary.empty()
                                                 ? site_vocabulary_of(table)
                                                 : std::vector<std::string>(site_vocabulary.begin(), site_vocabulary.end());
      add_one_hot("site", table.site_ids, vocab);
    }
    if (toggles.month) {
      std::vector<std::string> vocab, labels(n);
      for (int m = 1; m <= 12; ++m) vocab.push_back(std::to_string(m));
      for (std::size_t r = 0; r < n; ++r) labels[r] = std::to_string(tf[r].month);
      add_one_hot("month", labels, vocab);
    }
    if (toggles.weekday) {
      std::vector<std::string> vocab, labels(n);
      for (int w = 0; w < 7; ++w) vocab.push_back(std::to_string(w));
      for (std::size_t r = 0; r < n; ++r) labels[r] = std::to_string(tf[r].weekday);
      add_one_hot("weekday", labels, vocab);
    }
    if (toggles.season) {
      std::vector<std::string> vocab, labels(n);
      for (auto s : {Season::Winter, Season::Spring, Season::Summer, Season::Fall}) vocab.push_back(season_name(s));
      for (std::size_t r = 0; r < n; ++r) labels[r] = season_name(tf[r].season);
      add_one_hot("season", labels, vocab);
    }
  }

  d.X = Matrix(n, next_col);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) d.X(r, offset + c) = b(r, c);
    offset += b.cols();
  }
  for (double v : d.X.data())
    if (!std::isfinite(v)) throw DataError("design matrix contains a non-finite value; validate the panel first");
  return d;
}

}  // namespace wq
