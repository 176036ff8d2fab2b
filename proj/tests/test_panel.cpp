#include <doctest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "wq/date.hpp"
#include "wq/error.hpp"
#include "wq/panel.hpp"
#include "wq/synthetic.hpp"

using namespace wq;
using wq::test::TempDir;

namespace {

const char* kTwoByTwo =
    "date,site_id,X1,X2,Y\n"
    "2016-01-02,B,0.3,0.4,0.62\n"
    "2016-01-01,A,0.1,0.2,0.60\n"
    "2016-01-01,B,0.5,0.6,0.61\n"
    "2016-01-02,A,0.7,0.8,0.63\n";

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("dates parse and agree with a day-by-day calendar walk") {
  CHECK(Date::parse("2016-02-29") == Date{2016, 2, 29});
  CHECK_THROWS_AS(Date::parse("2015-02-29"), DataError);
  CHECK_THROWS_AS(Date::parse("2016-13-01"), DataError);
  CHECK_THROWS_AS(Date::parse("2016-1-01"), DataError);
  CHECK_THROWS_AS(Date::parse("yesterday"), DataError);
  for (int y : {1900, 1969, 1970, 2000, 2016, 2018, 2100})
    for (int m = 1; m <= 12; ++m)
      for (int d : {1, 15, days_in_month(y, m)}) {
        const Date date{y, m, d};
        CHECK(date.days_since_epoch() == wq::test::oracle_days_since_epoch(y, m, d));
        CHECK(Date::from_days(date.days_since_epoch()) == date);
        CHECK(Date::parse(date.to_string()) == date);
      }
}

TEST_CASE("load_panel infers dimensions, sorts dates and keeps site order") {
  TempDir dir;
  const auto ds = load_panel(dir.write("p.csv", kTwoByTwo), PanelSchema::simple(2));
  CHECK(ds.n_dates() == 2);
  CHECK(ds.n_sites() == 2);
  CHECK(ds.n_features() == 2);
  CHECK(ds.dates()[0] == Date{2016, 1, 1});
  CHECK(ds.site_ids() == std::vector<std::string>{"B", "A"});
  CHECK(ds.feature(0, 1, 0) == 0.1);
  CHECK(ds.feature(1, 0, 1) == 0.4);
  CHECK(ds.target(1, 1) == 0.63);
}

TEST_CASE("one-date one-site panel") {
  TempDir dir;
  const auto ds = load_panel(dir.write("p.csv", "date,site_id,X1,Y\n2017-05-05,S,0.5,0.7\n"), PanelSchema::simple(1));
  CHECK(ds.n_dates() == 1);
  CHECK(ds.n_sites() == 1);
}

TEST_CASE("schema maps long column names onto short ones") {
  TempDir dir;
  const auto csv = dir.write("p.csv",
                             "Date,Station,\"pH, water, median\",Temp C,Target pH\n"
                             "2016-01-01,S1,7.1,10,0.6\n");
  const auto schema = dir.write("schema.json", R"({"date_column": "Date", "site_column": "Station",
      "target_column": "Target pH",
      "features": [{"column": "Temp C", "name": "X1"}, {"column": "pH, water, median", "name": "X2"}]})");
  const auto ds = load_panel(csv, PanelSchema::from_json_file(schema));
  CHECK(ds.feature_names() == std::vector<std::string>{"X1", "X2"});
  CHECK(ds.feature(0, 0, 0) == 10.0);
  CHECK(ds.feature(0, 0, 1) == 7.1);
}

TEST_CASE("incomplete and duplicated panels are rejected naming the cell") {
  TempDir dir;
  const auto missing = dir.write("m.csv",
                                 "date,site_id,X1,Y\n"
                                 "2016-01-01,A,0.1,0.6\n"
                                 "2016-01-01,B,0.1,0.6\n"
                                 "2016-01-02,A,0.1,0.6\n");
  const auto msg = message_of([&] { load_panel(missing, PanelSchema::simple(1)); });
  CHECK(msg.find("2016-01-02") != std::string::npos);
  CHECK(msg.find("B") != std::string::npos);
  CHECK_THROWS_AS(load_panel(missing, PanelSchema::simple(1)), DataError);

  const auto dup = dir.write("d.csv",
                             "date,site_id,X1,Y\n"
                             "2016-01-01,A,0.1,0.6\n"
                             "2016-01-01,A,0.2,0.6\n");
  CHECK(message_of([&] { load_panel(dup, PanelSchema::simple(1)); }).find("duplicate") != std::string::npos);
  CHECK_THROWS(load_panel(dir / "nope.csv", PanelSchema::simple(1)));
  CHECK_THROWS_AS(load_panel(dir.write("bad.csv", "date,site_id,X1,Y\n2016-02-30,A,1,1\n"), PanelSchema::simple(1)),
                  DataError);
}

TEST_CASE("validation counts non-finite cells and only warns on range") {
  TempDir dir;
  const auto ok = load_panel(dir.write("ok.csv", "date,site_id,X1,Y\n2016-01-01,A,1.3,0.6\n"), PanelSchema::simple(1));
  const auto rep = validate_panel(ok);
  CHECK(rep.passed);
  CHECK(rep.total_non_finite() == 0);
  REQUIRE(rep.range_warnings.size() == 1);
  CHECK(rep.range_warnings[0].value == 1.3);

  const auto bad = load_panel(dir.write("bad.csv",
                                        "date,site_id,X1,X2,Y\n"
                                        "2016-01-01,A,0.5,NaN,0.6\n"
                                        "2016-01-01,B,0.5,0.5,0.6\n"),
                              PanelSchema::simple(2));
  const auto r2 = validate_panel(bad);
  CHECK_FALSE(r2.passed);
  CHECK(r2.total_non_finite() == 1);
  REQUIRE(r2.non_finite_cells.size() == 1);
  CHECK(r2.non_finite_cells[0].site_id == "A");
  CHECK(r2.non_finite_cells[0].column == "X2");
  CHECK(r2.non_finite_cells[0].date == Date{2016, 1, 1});
}

TEST_CASE("stacking is date-major and round-trips") {
  SyntheticPanelSpec spec;
  spec.n_dates = 3;
  spec.n_sites = 2;
  spec.n_features = 2;
  const auto ds = synthetic_panel(spec);
  const auto t = stack_panel(ds);
  REQUIRE(t.row_count() == 6);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const std::size_t r = i * 2 + j;
      CHECK(t.dates[r] == ds.dates()[i]);
      CHECK(t.site_ids[r] == ds.site_ids()[j]);
      CHECK(t.features(r, 1) == ds.feature(i, j, 1));
      CHECK(t.targets[r] == ds.target(i, j));
    }
  CHECK(unstack(t) == ds);
}

TEST_CASE("stack row count equals N*K and round-trips over random shapes") {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 25; ++trial) {
    SyntheticPanelSpec spec;
    spec.n_dates = 1 + gen() % 9;
    spec.n_sites = 1 + gen() % 6;
    spec.n_features = 1 + gen() % 4;
    spec.seed = gen();
    const auto ds = synthetic_panel(spec);
    const auto t = stack_panel(ds);
    CHECK(t.row_count() == spec.n_dates * spec.n_sites);
    CHECK(t.features.cols() == spec.n_features);
    CHECK(unstack(t) == ds);
  }
}

TEST_CASE("binary cache round-trips exactly") {
  TempDir dir;
  SyntheticPanelSpec spec;
  spec.seed = 5;
  const auto ds = synthetic_panel(spec);
  save_panel_cache(ds, dir / "c.bin");
  CHECK(load_panel_cache(dir / "c.bin") == ds);
  dir.write("junk.bin", "not a cache");
  CHECK_THROWS_AS(load_panel_cache(dir / "junk.bin"), DataError);
}

TEST_CASE("percentiles interpolate linearly between closest ranks") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(percentile(v, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(percentile(v, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(percentile(v, 0.75) == doctest::Approx(3.25).epsilon(1e-15));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);

  const auto s = summarize_column("c", std::vector<double>{0.5, 0.5, 0.5});
  CHECK(s.mean == 0.5);
  CHECK(s.sd == 0.0);
  const auto q = summarize_column("q", std::vector<double>{4, 1, 3, 2});
  CHECK(q.q25 == doctest::Approx(1.75));
  CHECK(q.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK_THROWS_AS(summarize_column("e", std::vector<double>{}), DataError);
}

TEST_CASE("summary statistics are ordered and invariant to row order") {
  SyntheticPanelSpec spec;
  spec.seed = 9;
  const auto t = stack_panel(synthetic_panel(spec));
  const auto a = summarize(t);
  StackedTable shuffled = t;
  std::vector<std::size_t> idx(t.row_count());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(3));
  shuffled.features = t.features.select_rows(idx);
  for (std::size_t i = 0; i < idx.size(); ++i) shuffled.targets[i] = t.targets[idx[i]];
  const auto b = summarize(shuffled);
  REQUIRE(a.columns.size() == t.feature_names.size() + 1);
  for (std::size_t c = 0; c < a.columns.size(); ++c) {
    const auto& x = a.columns[c];
    CHECK(x.min <= x.q25);
    CHECK(x.q25 <= x.q50);
    CHECK(x.q50 <= x.q75);
    CHECK(x.q75 <= x.max);
    CHECK(x.sd >= 0.0);
    CHECK(x.mean == b.columns[c].mean);
    CHECK(x.sd == b.columns[c].sd);
    CHECK(x.q75 == b.columns[c].q75);
  }
  const std::string csv = a.to_csv();
  CHECK(csv.rfind("statistic,X1,", 0) == 0);
  CHECK(csv.find("\n25%,") != std::string::npos);
}

TEST_CASE("correlation matrix: symmetry, unit diagonal, sign flip, zero variance") {
  StackedTable t;
  t.feature_names = {"a", "b", "c", "d"};
  std::mt19937_64 gen(1);
  const std::size_t n = 50;
  t.features = Matrix(n, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::uniform_real_distribution<double>(0, 1)(gen);
    t.features(i, 0) = x;
    t.features(i, 1) = -x;
    t.features(i, 2) = 0.25;
    t.features(i, 3) = std::uniform_real_distribution<double>(0, 1)(gen);
    t.targets.push_back(x);
    t.dates.push_back(Date::from_days(static_cast<std::int64_t>(i)));
    t.site_ids.push_back("S");
  }
  const auto c = correlation_matrix(t);
  CHECK(c.labels == t.feature_names);
  CHECK(c.values(0, 1) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(c.values(2, 0) == 0.0);
  CHECK(c.values(2, 2) == 1.0);
  CHECK_FALSE(c.warnings.empty());
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c.values(i, i) == 1.0);
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(std::abs(c.values(i, j) - c.values(j, i)) <= 1e-12);
      CHECK(std::abs(c.values(i, j)) <= 1.0);
    }
  }
  StackedTable one = t;
  one.features = t.features.select_rows(std::vector<std::size_t>{0});
  one.targets.resize(1);
  one.dates.resize(1);
  one.site_ids.resize(1);
  CHECK_THROWS_AS(correlation_matrix(one), DataError);
}
