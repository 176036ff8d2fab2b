#include "wq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wq/csv.hpp"
#include "wq/error.hpp"
#include "wq/random.hpp"

namespace wq {

PanelDataset synthetic_panel(const SyntheticPanelSpec& spec) {
  if (spec.n_dates == 0 || spec.n_sites == 0 || spec.n_features == 0)
    throw ConfigError("synthetic panel needs at least one date, site and feature");
  if (spec.step_days < 1) throw ConfigError("synthetic panel step_days must be >= 1");
  Rng rng(derive_seed(spec.seed, "synthetic"));
  const std::size_t p = spec.n_features;

  std::vector<double> weight(p);
  for (std::size_t f = 0; f < p; ++f) weight[f] = 0.02 + 0.01 * static_cast<double>((f * 7) % p) / static_cast<double>(p);
  if (p > 5) weight[5] = 0.25;

  std::vector<double> site_effect(spec.n_sites), site_shift(spec.n_sites);
  std::vector<std::string> sites;
  for (std::size_t s = 0; s < spec.n_sites; ++s) {
    site_effect[s] = 0.05 * rng.uniform01();
    site_shift[s] = 0.2 * rng.uniform01();
    sites.push_back("S" + std::to_string(1000 + s));
  }

  std::vector<Date> dates;
  const auto d0 = spec.start.days_since_epoch();
  for (std::size_t d = 0; d < spec.n_dates; ++d)
    dates.push_back(Date::from_days(d0 + static_cast<std::int64_t>(d) * spec.step_days));

  std::vector<double> features(spec.n_dates * spec.n_sites * p), targets(spec.n_dates * spec.n_sites);
  for (std::size_t d = 0; d < spec.n_dates; ++d) {
    const double season = std::sin(2.0 * std::numbers::pi * (dates[d].month - 1) / 12.0);
    for (std::size_t s = 0; s < spec.n_sites; ++s) {
      double y = 0.3 + site_effect[s] + 0.03 * season;
      for (std::size_t f = 0; f < p; ++f) {
        const double x = std::clamp(0.8 * rng.uniform01() + site_shift[s], 0.0, 1.0);
        features[(d * spec.n_sites + s) * p + f] = x;
        y += weight[f] * x;
      }
      targets[d * spec.n_sites + s] = y + spec.noise * rng.normal();
    }
  }
  std::vector<std::string> names;
  for (std::size_t f = 0; f < p; ++f) names.push_back("X" + std::to_string(f + 1));
  return PanelDataset(std::move(dates), std::move(sites), std::move(names), std::move(features), std::move(targets));
}

std::string panel_to_csv(const PanelDataset& ds) {
  std::string out = "date,site_id";
  for (const auto& n : ds.feature_names()) out += "," + csv_escape(n);
  out += "," + csv_escape(ds.target_name()) + "\n";
  for (std::size_t d = 0; d < ds.n_dates(); ++d) {
    for (std::size_t s = 0; s < ds.n_sites(); ++s) {
      out += ds.dates()[d].to_string() + "," + csv_escape(ds.site_ids()[s]);
      for (std::size_t f = 0; f < ds.n_features(); ++f) out += "," + format_double(ds.feature(d, s, f));
      out += "," + format_double(ds.target(d, s)) + "\n";
    }
  }
  return out;
}

std::pair<PanelDataset, PanelDataset> split_by_date(const PanelDataset& ds, std::size_t n_first) {
  if (n_first == 0 || n_first >= ds.n_dates())
    throw ConfigError("date split must leave both parts non-empty (" + std::to_string(n_first) + " of " +
                      std::to_string(ds.n_dates()) + ")");
  const std::size_t block = ds.n_sites() * ds.n_features();
  const auto f = ds.raw_features();
  const auto t = ds.raw_targets();
  auto part = [&](std::size_t a, std::size_t b) {
    return PanelDataset(std::vector<Date>(ds.dates().begin() + a, ds.dates().begin() + b), ds.site_ids(),
                        ds.feature_names(), std::vector<double>(f.begin() + a * block, f.begin() + b * block),
                        std::vector<double>(t.begin() + a * ds.n_sites(), t.begin() + b * ds.n_sites()),
                        ds.target_name());
  };
  return {part(0, n_first), part(n_first, ds.n_dates())};
}

}  // namespace wq
