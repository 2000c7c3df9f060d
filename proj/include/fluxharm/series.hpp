#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fluxharm/errors.hpp"

namespace fluxharm {

using Date = std::chrono::year_month_day;

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)};
}

inline Date add_days(Date d, long n) {
  return Date{std::chrono::sys_days(d) + std::chrono::days(n)};
}

inline long days_between(Date from, Date to) {
  return (std::chrono::sys_days(to) - std::chrono::sys_days(from)).count();
}

// Strict ISO-8601 calendar date (YYYY-MM-DD). Returns nullopt on anything else.
inline std::optional<Date> parse_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  auto digits = [](std::string_view t) {
    long v = 0;
    for (char c : t) {
      if (c < '0' || c > '9') return -1L;
      v = v * 10 + (c - '0');
    }
    return v;
  };
  long y = digits(s.substr(0, 4));
  long m = digits(s.substr(5, 2));
  long d = digits(s.substr(8, 2));
  if (y < 0 || m < 0 || d < 0) return std::nullopt;
  Date date = make_date(int(y), unsigned(m), unsigned(d));
  if (!date.ok()) return std::nullopt;
  return date;
}

inline std::string format_date(Date d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()),
                unsigned(d.month()), unsigned(d.day()));
  return buf;
}

// One uniformly sampled daily time series. The sampling step is fixed at one
// day; start_date anchors index 0. qf is empty when no quality flags exist,
// otherwise it has the same length as values with entries in [0, 1]
// (1 = full confidence).
struct FluxSeries {
  std::string site_id;
  std::string variable;
  Date start_date = make_date(2007, 1, 1);
  std::vector<double> values;
  std::vector<double> qf;

  std::size_t size() const { return values.size(); }
  bool has_qf() const { return !qf.empty(); }
  Date date_at(std::size_t t) const { return add_days(start_date, long(t)); }
};

// Returns the series unchanged when it is long enough, all values are finite,
// and quality flags (if any) lie in [0, 1].
inline FluxSeries validate_series(FluxSeries s, std::size_t min_len) {
  if (s.values.size() < min_len)
    fail(ErrorCode::TooShort, "series has " + std::to_string(s.values.size()) +
                                  " samples, need at least " + std::to_string(min_len));
  for (std::size_t i = 0; i < s.values.size(); ++i)
    if (!std::isfinite(s.values[i]))
      fail(ErrorCode::NonFiniteValue, "non-finite value at index " + std::to_string(i));
  if (!s.qf.empty()) {
    if (s.qf.size() != s.values.size())
      fail(ErrorCode::QfOutOfRange, "qf length does not match values");
    for (std::size_t i = 0; i < s.qf.size(); ++i)
      if (!(s.qf[i] >= 0.0 && s.qf[i] <= 1.0))
        fail(ErrorCode::QfOutOfRange, "qf out of [0,1] at index " + std::to_string(i));
  }
  return s;
}

}  // namespace fluxharm
