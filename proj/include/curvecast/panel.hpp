/*
 * Copyright 2026 The curvecast Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

/**
 * @file panel.hpp
 * @brief Day-by-interval panels of counts and their CSV form.
 *
 * CSV layout: a header `date,HH:MM,HH:MM,...` and one row per day, the
 * date in ISO form (YYYY-MM-DD). A column labelled HH:MM holds the value
 * for the interval ending at that clock time. Times are carried as minutes
 * since midnight.
 */

#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"

namespace curvecast {

/// "HH:MM" (or "H:MM") to minutes since midnight.
inline double parse_clock(std::string_view s) {
  const auto colon = s.find(':');
  int h = -1, m = -1;
  bool ok = colon != std::string_view::npos && colon > 0 && s.size() - colon == 3;
  if (ok) {
    const auto r1 = std::from_chars(s.data(), s.data() + colon, h);
    const auto r2 = std::from_chars(s.data() + colon + 1, s.data() + s.size(), m);
    ok = r1.ec == std::errc{} && r1.ptr == s.data() + colon && r2.ec == std::errc{} &&
         r2.ptr == s.data() + s.size() && h >= 0 && h <= 24 && m >= 0 && m < 60 && (h < 24 || m == 0);
  }
  if (!ok) fail(ErrorKind::schema, "bad clock time '" + std::string(s) + "' (expected HH:MM)");
  return 60.0 * h + m;
}

/// Minutes since midnight to "HH:MM"; the value is rounded to a minute.
inline std::string format_clock(double minutes) {
  const long total = std::lround(minutes);
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << total / 60 << ':' << std::setw(2) << std::setfill('0') << total % 60;
  return os.str();
}

/// Weekday of an ISO date, 0 = Sunday ... 6 = Saturday.
inline int weekday_of(std::string_view iso) {
  int y = 0;
  unsigned mo = 0, d = 0;
  bool ok = iso.size() == 10 && iso[4] == '-' && iso[7] == '-';
  if (ok) {
    const auto r1 = std::from_chars(iso.data(), iso.data() + 4, y);
    const auto r2 = std::from_chars(iso.data() + 5, iso.data() + 7, mo);
    const auto r3 = std::from_chars(iso.data() + 8, iso.data() + 10, d);
    ok = r1.ec == std::errc{} && r2.ec == std::errc{} && r3.ec == std::errc{} && r1.ptr == iso.data() + 4 &&
         r2.ptr == iso.data() + 7 && r3.ptr == iso.data() + 10;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ok || !ymd.ok()) fail(ErrorKind::schema, "bad date '" + std::string(iso) + "' (expected YYYY-MM-DD)");
  return static_cast<int>(std::chrono::weekday{std::chrono::sys_days{ymd}}.c_encoding());
}

inline const char* weekday_name(int wd) {
  static constexpr const char* names[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
  return wd >= 0 && wd < 7 ? names[wd] : "?";
}

/// ISO date `days` after `iso`.
inline std::string add_days(std::string_view iso, int days) {
  weekday_of(iso);  // validates
  using namespace std::chrono;
  const year_month_day ymd{year{std::stoi(std::string(iso.substr(0, 4)))},
                           month{static_cast<unsigned>(std::stoi(std::string(iso.substr(5, 2))))},
                           day{static_cast<unsigned>(std::stoi(std::string(iso.substr(8, 2))))}};
  const year_month_day out{sys_days{ymd} + std::chrono::days{days}};
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << static_cast<int>(out.year()) << '-' << std::setw(2)
     << static_cast<unsigned>(out.month()) << '-' << std::setw(2) << static_cast<unsigned>(out.day());
  return os.str();
}

struct PanelDay {
  std::string date;
  int weekday = 0;
  CurveSample sample;
};

struct CurvePanel {
  std::vector<std::string> labels;  // column headers, HH:MM
  std::vector<double> times;        // minutes since midnight
  int interval_minutes = 0;
  std::vector<PanelDay> days;       // ascending by date

  double day_start() const { return times.front(); }
  double day_end() const { return times.back(); }

  std::vector<CurveSample> samples() const {
    std::vector<CurveSample> out;
    out.reserve(days.size());
    for (const auto& d : days) out.push_back(d.sample);
    return out;
  }

  /// Checks the invariants; full rows only unless `allow_partial`.
  void validate(bool allow_partial = false) const {
    if (times.size() != labels.size() || times.empty()) fail(ErrorKind::schema, "panel has no time grid");
    for (const auto& d : days) {
      if (d.sample.times.size() > times.size() || (!allow_partial && d.sample.times.size() != times.size()))
        fail(ErrorKind::schema, "day " + d.date + " does not match the panel grid");
      for (double v : d.sample.values)
        if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::invalid_input, "negative value on " + d.date);
    }
  }
};

/// Builds the time grid from header labels; intervals must be equally spaced.
inline CurvePanel make_panel_grid(std::vector<std::string> labels) {
  CurvePanel p;
  if (labels.size() < 2) fail(ErrorKind::schema, "need at least two interval columns");
  for (const auto& l : labels) p.times.push_back(parse_clock(l));
  const double step = p.times[1] - p.times[0];
  for (std::size_t i = 1; i < p.times.size(); ++i)
    if (p.times[i] - p.times[i - 1] != step || step <= 0.0)
      fail(ErrorKind::schema, "interval columns must be increasing and equally spaced (at " + labels[i] + ")");
  p.interval_minutes = static_cast<int>(step);
  p.labels = std::move(labels);
  return p;
}

struct CsvOptions {
  std::set<std::string> excluded_dates;
  /// Keep rows whose trailing cells are blank, as a prefix of the day
  /// (used for the day being forecast).
  bool keep_partial_rows = false;
};

/// ISO dates, one per line; blank lines and lines starting with '#' skipped.
inline std::set<std::string> read_exclusions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot read exclusion list " + path);
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t\r");
    const std::string d = line.substr(b, e - b + 1);
    weekday_of(d);
    out.insert(d);
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size() && std::isfinite(v);
}

}  // namespace detail

/// Reads one CSV stream into `panel` (whose grid is set from the first
/// header seen). Rows with a missing, non-numeric or negative cell are
/// dropped with a warning.
inline void read_csv(std::istream& in, const std::string& source, CurvePanel& panel, const CsvOptions& opt,
                     std::vector<std::string>* warnings) {
  const auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(source + ": " + msg);
  };
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::schema, source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  auto header = detail::split_csv_line(line);
  if (header.empty() || header.front() != "date")
    fail(ErrorKind::schema, source + ": header must start with 'date'");
  header.erase(header.begin());
  if (panel.labels.empty()) {
    panel = make_panel_grid(header);
  } else if (header != panel.labels) {
    fail(ErrorKind::schema, source + ": interval columns differ from earlier input");
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = "row " + std::to_string(row);
    if (cells.size() != panel.labels.size() + 1) {
      warn(where + " has " + std::to_string(cells.size()) + " cells, expected " +
           std::to_string(panel.labels.size() + 1) + "; dropped");
      continue;
    }
    const std::string& date = cells[0];
    int wd = 0;
    try {
      wd = weekday_of(date);
    } catch (const Error&) {
      warn(where + " has bad date '" + date + "'; dropped");
      continue;
    }
    if (opt.excluded_dates.count(date)) continue;
    PanelDay day{date, wd, CurveSample{{}, {}, date}};
    bool bad = false, ended = false;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      double v = 0.0;
      if (cells[j].empty() && opt.keep_partial_rows) {
        ended = true;
        continue;
      }
      if (ended || !detail::parse_number(cells[j], v) || v < 0.0) {
        warn(where + " (" + date + ") has a missing, non-numeric or negative value at " + panel.labels[j - 1] +
             "; dropped");
        bad = true;
        break;
      }
      day.sample.times.push_back(panel.times[j - 1]);
      day.sample.values.push_back(v);
    }
    if (bad) continue;
    if (day.sample.times.empty()) {
      warn(where + " (" + date + ") has no values; dropped");
      continue;
    }
    const auto dup = std::find_if(panel.days.begin(), panel.days.end(),
                                  [&](const PanelDay& d) { return d.date == date; });
    if (dup != panel.days.end()) {
      warn(where + ": duplicate date " + date + "; later row dropped");
      continue;
    }
    panel.days.push_back(std::move(day));
  }
}

/// Reads and merges CSV files; days are sorted by date.
inline CurvePanel ingest_csv(const std::vector<std::string>& paths, const CsvOptions& opt = {},
                             std::vector<std::string>* warnings = nullptr) {
  CurvePanel panel;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot read " + path);
    read_csv(in, path, panel, opt, warnings);
  }
  std::stable_sort(panel.days.begin(), panel.days.end(),
                   [](const PanelDay& a, const PanelDay& b) { return a.date < b.date; });
  if (panel.days.empty()) fail(ErrorKind::no_data, "no usable days in the input");
  return panel;
}

inline CurvePanel ingest_csv(const std::string& path, const CsvOptions& opt = {},
                             std::vector<std::string>* warnings = nullptr) {
  return ingest_csv(std::vector<std::string>{path}, opt, warnings);
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_value(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Writes the panel in the input CSV layout. Partial days get blank cells.
inline void emit_csv(const CurvePanel& panel, std::ostream& out) {
  out << "date";
  for (const auto& l : panel.labels) out << ',' << l;
  out << '\n';
  for (const auto& d : panel.days) {
    out << d.date;
    for (std::size_t j = 0; j < panel.labels.size(); ++j) {
      out << ',';
      if (j < d.sample.values.size()) out << format_value(d.sample.values[j]);
    }
    out << '\n';
  }
}

inline void emit_csv(const CurvePanel& panel, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  emit_csv(panel, out);
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

}  // namespace curvecast
