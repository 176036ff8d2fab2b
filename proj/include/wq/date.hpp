#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace wq {

// Proleptic Gregorian calendar date.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  // Parses YYYY-MM-DD. Throws DataError on malformed or impossible dates.
  static Date parse(std::string_view text);
  static Date from_days(std::int64_t days);

  // Days since 1970-01-01.
  std::int64_t days_since_epoch() const;
  std::string to_string() const;

  friend auto operator<=>(const Date&, const Date&) = default;
};

bool is_leap_year(int year);
int days_in_month(int year, int month);

}  // namespace wq
