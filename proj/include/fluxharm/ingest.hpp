#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fluxharm/errors.hpp"
#include "fluxharm/series.hpp"

namespace fluxharm {

// A column reference: by header name, or by zero-based position.
struct ColumnRef {
  std::optional<std::string> name;
  std::optional<std::size_t> index;

  static ColumnRef by_name(std::string n) { return ColumnRef{std::move(n), std::nullopt}; }
  static ColumnRef by_index(std::size_t i) { return ColumnRef{std::nullopt, i}; }
  bool set() const { return name.has_value() || index.has_value(); }
};

struct ColumnSpec {
  ColumnRef date_column = ColumnRef::by_name("date");
  ColumnRef value_column = ColumnRef::by_name("value");
  ColumnRef qf_column;  // unset = no quality flags
  char delimiter = ',';
  char decimal_mark = '.';
  // 0 rejects any missing day; 1..5 linearly interpolates gaps up to that many
  // consecutive days. Larger values are capped at 5: beyond that we refuse to
  // invent data.
  int max_gap_fill_days = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == delim) {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

inline bool is_missing_cell(std::string_view cell) {
  return cell.empty() || cell == "NA" || cell == "NaN";
}

inline std::optional<double> parse_number(std::string_view cell, char decimal_mark) {
  std::string buf(cell);
  if (decimal_mark != '.')
    for (char& c : buf)
      if (c == decimal_mark) c = '.';
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc() || ptr != buf.data() + buf.size()) return std::nullopt;
  return v;
}

struct RawRow {
  Date date;
  std::optional<double> value;
  std::optional<double> qf;
  std::size_t line_no;
};

inline std::size_t resolve_column(const ColumnRef& ref,
                                  const std::vector<std::string_view>& header,
                                  std::size_t n_cells, const char* what) {
  if (ref.index) {
    if (*ref.index >= n_cells)
      fail(ErrorCode::MalformedRow,
           std::string(what) + " column index out of range");
    return *ref.index;
  }
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == *ref.name) return i;
  fail(ErrorCode::MalformedRow,
       std::string(what) + " column '" + *ref.name + "' not found in header");
}

}  // namespace detail

// Parses one daily series from delimited text. Rows are sorted by date;
// duplicate dates are rejected; missing calendar days (or rows whose value
// cell is NA/NaN/empty) are gaps, filled by linear interpolation when the run
// is short enough under spec.max_gap_fill_days, otherwise rejected.
inline FluxSeries parse_flux_csv(std::istream& source, const ColumnSpec& spec,
                                 std::string site_id = "", std::string variable = "") {
  if (!spec.date_column.set() || !spec.value_column.set())
    fail(ErrorCode::ConfigError, "date and value columns must be configured");
  if (spec.delimiter == spec.decimal_mark)
    fail(ErrorCode::ConfigError, "delimiter equals decimal mark");
  if (spec.qf_column.set() && spec.qf_column.name && spec.value_column.name &&
      *spec.qf_column.name == *spec.value_column.name)
    fail(ErrorCode::ConfigError, "value and qf columns must differ");

  const bool named = spec.date_column.name || spec.value_column.name ||
                     (spec.qf_column.set() && spec.qf_column.name);

  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_storage;
  bool have_columns = false;
  std::size_t c_date = 0, c_value = 0, c_qf = 0;
  bool want_qf = spec.qf_column.set();

  std::vector<detail::RawRow> rows;
  while (std::getline(source, line)) {
    ++line_no;
    std::string_view lv = detail::trim(line);
    if (lv.empty()) continue;
    auto cells = detail::split_line(lv, spec.delimiter);

    if (!have_columns) {
      if (named) {
        // First non-empty line is the header.
        header_storage = std::string(lv);
        header = detail::split_line(header_storage, spec.delimiter);
        c_date = detail::resolve_column(spec.date_column, header, cells.size(), "date");
        c_value = detail::resolve_column(spec.value_column, header, cells.size(), "value");
        if (want_qf)
          c_qf = detail::resolve_column(spec.qf_column, header, cells.size(), "qf");
        have_columns = true;
        continue;
      }
      // Index-only spec: skip a header line if the date cell does not parse.
      c_date = *spec.date_column.index;
      c_value = *spec.value_column.index;
      if (want_qf) c_qf = *spec.qf_column.index;
      have_columns = true;
      std::size_t needed = std::max(c_date, c_value);
      if (want_qf) needed = std::max(needed, c_qf);
      if (cells.size() > needed && !parse_date(cells[c_date])) continue;
    }

    std::size_t needed = std::max(c_date, c_value);
    if (want_qf) needed = std::max(needed, c_qf);
    if (cells.size() <= needed)
      fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) +
                                        ": expected at least " + std::to_string(needed + 1) +
                                        " cells, got " + std::to_string(cells.size()));

    auto date = parse_date(cells[c_date]);
    if (!date)
      fail(ErrorCode::MalformedRow,
           "line " + std::to_string(line_no) + ": bad date '" + std::string(cells[c_date]) + "'");

    detail::RawRow row;
    row.date = *date;
    row.line_no = line_no;
    if (!detail::is_missing_cell(cells[c_value])) {
      auto v = detail::parse_number(cells[c_value], spec.decimal_mark);
      if (!v)
        fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) +
                                          ": bad value '" + std::string(cells[c_value]) + "'");
      row.value = *v;
    }
    if (want_qf && !detail::is_missing_cell(cells[c_qf])) {
      auto q = detail::parse_number(cells[c_qf], spec.decimal_mark);
      if (!q)
        fail(ErrorCode::MalformedRow, "line " + std::to_string(line_no) +
                                          ": bad qf '" + std::string(cells[c_qf]) + "'");
      row.qf = *q;
    }
    rows.push_back(row);
  }

  if (rows.empty()) fail(ErrorCode::EmptySeries, "no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const detail::RawRow& a, const detail::RawRow& b) {
                     return std::chrono::sys_days(a.date) < std::chrono::sys_days(b.date);
                   });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].date == rows[i - 1].date)
      fail(ErrorCode::MalformedRow, "line " + std::to_string(rows[i].line_no) +
                                        ": duplicate date " + format_date(rows[i].date));

  // Lay the rows out on the daily grid; a row with a missing value (or missing
  // qf when qf is configured) counts as a gap at its date.
  const Date start = rows.front().date;
  const long n = days_between(start, rows.back().date) + 1;
  std::vector<double> values(std::size_t(n), std::nan(""));
  std::vector<double> qf(want_qf ? std::size_t(n) : 0, std::nan(""));
  for (const auto& row : rows) {
    long t = days_between(start, row.date);
    bool complete = row.value.has_value() && (!want_qf || row.qf.has_value());
    if (!complete) continue;
    values[std::size_t(t)] = *row.value;
    if (want_qf) qf[std::size_t(t)] = *row.qf;
  }

  const int max_fill = std::min(spec.max_gap_fill_days, 5);
  auto fill_gaps = [&](std::vector<double>& v) {
    for (long t = 0; t < n; ++t) {
      if (!std::isnan(v[std::size_t(t)])) continue;
      long end = t;
      while (end < n && std::isnan(v[std::size_t(end)])) ++end;
      long len = end - t;
      if (t == 0 || end == n || len > max_fill)
        fail(ErrorCode::NonUniformSampling,
             std::to_string(len) + "-day gap at " + format_date(add_days(start, t)) +
                 (max_fill > 0 ? " exceeds the fill limit" : " and gap filling is disabled"));
      double lo = v[std::size_t(t - 1)], hi = v[std::size_t(end)];
      for (long u = t; u < end; ++u)
        v[std::size_t(u)] = lo + (hi - lo) * double(u - t + 1) / double(len + 1);
      t = end;
    }
  };
  fill_gaps(values);
  if (want_qf) fill_gaps(qf);

  // Displayed QF scales are often percent; normalize to [0,1].
  if (want_qf) {
    double qmax = *std::max_element(qf.begin(), qf.end());
    if (qmax > 1.0)
      for (double& q : qf) q /= 100.0;
  }

  FluxSeries s;
  s.site_id = std::move(site_id);
  s.variable = std::move(variable);
  s.start_date = start;
  s.values = std::move(values);
  s.qf = std::move(qf);
  return s;
}

// Emits a series in the same format parse_flux_csv reads (full double
// precision, so parse ∘ serialize round-trips exactly).
inline void write_flux_csv(std::ostream& out, const FluxSeries& s, char delimiter = ',') {
  out << "date" << delimiter << "value";
  if (s.has_qf()) out << delimiter << "qf";
  out << "\n";
  char buf[40];
  for (std::size_t t = 0; t < s.size(); ++t) {
    out << format_date(s.date_at(t)) << delimiter;
    std::snprintf(buf, sizeof buf, "%.17g", s.values[t]);
    out << buf;
    if (s.has_qf()) {
      std::snprintf(buf, sizeof buf, "%.17g", s.qf[t]);
      out << delimiter << buf;
    }
    out << "\n";
  }
}

}  // namespace fluxharm
