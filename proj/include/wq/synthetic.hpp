#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "wq/date.hpp"
#include "wq/panel.hpp"

namespace wq {

// Panel with features in [0, 1] and a positive target that is linear in the
// features (X6 carries the largest weight) plus a site effect, a seasonal
// term and Gaussian noise.
struct SyntheticPanelSpec {
  std::size_t n_dates = 60;
  std::size_t n_sites = 5;
  std::size_t n_features = 11;
  Date start{2015, 1, 1};
  int step_days = 3;
  double noise = 0.01;
  std::uint64_t seed = 0;
};

PanelDataset synthetic_panel(const SyntheticPanelSpec& spec);

// Long format: date,site_id,<features>,<target>; date-major rows.
std::string panel_to_csv(const PanelDataset& ds);

// First `n_first` dates and the remaining dates.
std::pair<PanelDataset, PanelDataset> split_by_date(const PanelDataset& ds, std::size_t n_first);

}  // namespace wq
