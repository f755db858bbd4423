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
 * @file harness.hpp
 * @brief Rolling out-of-sample evaluation of intraday forecasts.
 *
 * For every test day the model is estimated from a window of preceding
 * days (optionally only those on the same weekday), segmented at the cut,
 * and the part of the day observed up to the cut is turned into a
 * regression spline on the left sub-segment. The forecast is scored on the
 * intervals ending after `eval_start`:
 *
 *   RMSE_j = sqrt(mean_k (N_jk - N_hat_jk)^2)
 *   APE_j  = 100 mean_k |N_jk - N_hat_jk| / N_jk
 *   COVER_j = share of intervals with lower < N_jk < upper
 *   WIDTH_j = mean_k (upper - lower)
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "curvecast/bands.hpp"
#include "curvecast/blup.hpp"
#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/panel.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

enum class TrainingMode { same_weekday, rolling_all };

enum class BandChoice { none, global, local, cv_global, cv_local };

inline const char* to_string(BandChoice b) {
  switch (b) {
    case BandChoice::none: return "none";
    case BandChoice::global: return "global";
    case BandChoice::local: return "local";
    case BandChoice::cv_global: return "cv_global";
    case BandChoice::cv_local: return "cv_local";
  }
  return "?";
}

struct ProtocolConfig {
  TrainingMode training = TrainingMode::same_weekday;
  int window_days = 100;               // preceding panel rows searched for training days
  std::optional<int> first_test_day;   // panel index; defaults to window_days
  std::optional<int> last_test_day;    // inclusive
  double cut = 600.0;                  // minutes since midnight
  double eval_start = 720.0;

  int order = 4;
  double knot_spacing = 60.0;          // minutes between breaks
  std::vector<double> breaks;          // explicit breaks override the spacing

  DimensionRule dims;
  bool cv_dims = false;                // pick (p, q) by K-fold CV on the training days
  int cv_max_p = 4;
  int cv_max_q = 2;

  Method method = Method::blup;
  double ridge_sigma2 = 0.0;           // <= 0: model sigma2

  BandChoice band = BandChoice::cv_local;
  double delta = 0.05;
  int folds = 10;
  CvTarget cv_target = CvTarget::observations;
  bool shuffle_folds = false;
  std::size_t n_sims = 4000;
  std::uint64_t seed = 1;

  int min_training_days = 0;  // 0: max(folds, 3)

  std::string label() const { return std::string(to_string(method)) + "@" + format_clock(cut); }

  int min_training() const { return min_training_days > 0 ? min_training_days : std::max(folds, 3); }

  void validate() const {
    if (window_days < 2) fail(ErrorKind::usage, "window_days must be >= 2");
    if (eval_start < cut) fail(ErrorKind::usage, "eval_start must not precede the cut");
    if (order < 2) fail(ErrorKind::usage, "spline order must be >= 2");
    if (breaks.empty() && !(knot_spacing > 0.0)) fail(ErrorKind::usage, "knot spacing must be positive");
    if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::usage, "delta must lie in (0, 1)");
    if (folds < 2) fail(ErrorKind::usage, "need at least two folds");
    if (cv_max_p < 1 || cv_max_q < 0) fail(ErrorKind::usage, "bad CV dimension limits");
  }
};

/// Spline space over the panel's day: breaks every `knot_spacing` minutes
/// from the first to the last label, a short remainder merged into the
/// last span. Explicit `breaks` take precedence.
inline SplineSpace day_space(const CurvePanel& panel, const ProtocolConfig& cfg) {
  const double a = panel.day_start(), b = panel.day_end();
  std::vector<double> br = cfg.breaks;
  if (br.empty()) {
    for (double t = a; t < b - 0.5 * cfg.knot_spacing; t += cfg.knot_spacing) br.push_back(t);
    br.push_back(b);
  }
  if (br.front() != a || br.back() != b)
    fail(ErrorKind::usage, "breaks must start and end at the first and last interval");
  return SplineSpace(KnotVector::clamped(br, cfg.order));
}

/// day_space, after checking that the cut lies inside the day.
inline SplineSpace protocol_space(const CurvePanel& panel, const ProtocolConfig& cfg) {
  const double a = panel.day_start(), b = panel.day_end();
  if (!(cfg.cut > a && cfg.cut < b)) {
    std::ostringstream os;
    os << "cut " << format_clock(cfg.cut) << " must lie strictly inside the day (" << format_clock(a) << ", "
       << format_clock(b) << ")";
    fail(ErrorKind::usage, os.str());
  }
  return day_space(panel, cfg);
}

/// Training curves for panel day `index`.
inline std::vector<CurveSample> training_days(const CurvePanel& panel, std::size_t index, const ProtocolConfig& cfg) {
  std::vector<CurveSample> out;
  const std::size_t from = index >= static_cast<std::size_t>(cfg.window_days) ? index - cfg.window_days : 0;
  for (std::size_t i = from; i < index; ++i)
    if (cfg.training == TrainingMode::rolling_all || panel.days[i].weekday == panel.days[index].weekday)
      if (panel.days[i].sample.times.size() == panel.times.size()) out.push_back(panel.days[i].sample);
  return out;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Mean squared forecast error of held-out days for each candidate (p, q),
/// K-fold over the training days (round robin). Returns the best candidate;
/// ties go to the smaller p + q.
inline Dimensions cv_select_dimensions(std::span<const CurveSample> train, const SplineSpace& space,
                                       const ProtocolConfig& cfg) {
  const std::size_t m = train.size();
  const int folds = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.folds), m));
  if (folds < 2) fail(ErrorKind::infeasible_fold, "too few training days for cross-validation");
  const double a = space.lower();
  std::optional<Dimensions> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int total = 1; total <= cfg.cv_max_p + cfg.cv_max_q; ++total) {
    for (int p = std::min(total, cfg.cv_max_p); p >= 1; --p) {
      const int q = total - p;
      if (q > cfg.cv_max_q) continue;
      double sse = 0.0;
      std::size_t count = 0;
      bool ok = true;
      for (int f = 0; f < folds && ok; ++f) {
        std::vector<CurveSample> fit, held;
        for (std::size_t i = 0; i < m; ++i) (static_cast<int>(i % folds) == f ? held : fit).push_back(train[i]);
        if (static_cast<int>(fit.size()) - 1 < p + q) {
          ok = false;
          break;
        }
        try {
          const CurveModel model = estimate_model(fit, space, DimensionRule{Dimensions{p, q}, cfg.dims.threshold});
          if (model.p() != p || model.q() != q) {
            ok = false;
            break;
          }
          const SegmentedModel seg = segment(model, cfg.cut);
          for (const CurveSample& c : held) {
            const SplineFunction y1 = fit_with_coarsening(c.window(a, cfg.cut), seg.left_space);
            const Prediction pred = forecast(seg, y1, cfg.method, cfg.ridge_sigma2);
            for (std::size_t i = 0; i < c.times.size(); ++i)
              if (c.times[i] > cfg.eval_start) {
                const double e = c.values[i] - pred.mean(c.times[i]);
                sse += e * e;
                ++count;
              }
          }
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::degenerate_model && e.kind() != ErrorKind::underdetermined_fit) throw;
          ok = false;
        }
      }
      if (!ok || count == 0) continue;
      const double score = sse / static_cast<double>(count);
      if (score < best_score) {
        best_score = score;
        best = Dimensions{p, q};
      }
    }
  }
  if (!best) fail(ErrorKind::degenerate_model, "no (p, q) candidate could be fitted in cross-validation");
  return *best;
}

/// Everything produced for a single day.
struct DayForecast {
  CurveModel model;
  Prediction prediction;
  std::optional<Band> band;
  bool coarsened = false;
  std::string band_note;  // why no band was produced, if one was requested
};

/// Fits the model on `train`, conditions on `today` up to the cut and
/// builds the requested band.
inline DayForecast forecast_day(std::span<const CurveSample> train, const CurveSample& today,
                                const SplineSpace& space, const ProtocolConfig& cfg, std::uint64_t seed) {
  DimensionRule rule = cfg.dims;
  if (cfg.cv_dims && cfg.method != Method::mean) rule.fixed = cv_select_dimensions(train, space, cfg);
  const CurveModel model = estimate_model(train, space, rule);
  const SegmentedModel seg = segment(model, cfg.cut);
  bool coarsened = false;
  std::optional<SplineFunction> y1;
  if (cfg.method != Method::mean) {
    const CurveSample pre = today.window(space.lower(), cfg.cut);
    y1 = fit_with_coarsening(pre, seg.left_space, &coarsened);
  }
  const SplineFunction at_mean(seg.left_space, seg.mu1);
  Prediction pred = forecast(seg, y1 ? *y1 : at_mean, cfg.method, cfg.ridge_sigma2);
  std::optional<Band> band;
  std::string band_note;
  const double level = 1.0 - cfg.delta;
  try {
    switch (cfg.band) {
      case BandChoice::none:
        break;
      case BandChoice::global:
      case BandChoice::local: {
        const BandGrid grid = build_grid(seg.right_space);
        const Eigen::MatrixXd cov = grid_covariance(seg.right_space, pred.cond_cov, grid);
        require_spread(grid_sd(cov), spread_scale(seg));
        const CriticalValues z = critical_values(cov, grid, cfg.delta, cfg.n_sims, seed);
        const bool global = cfg.band == BandChoice::global;
        band = envelope(grid, pred, global ? z.global : z.local, global ? BandKind::global : BandKind::local, level);
        break;
      }
      case BandChoice::cv_global:
      case BandChoice::cv_local: {
        CvConfig cv{space, cfg.cut, DimensionRule{Dimensions{model.p(), model.q()}, cfg.dims.threshold},
                    cfg.method, cfg.ridge_sigma2, cfg.folds, cfg.delta, cfg.cv_target, cfg.eval_start,
                    cfg.shuffle_folds ? std::optional<std::uint64_t>(seed) : std::nullopt};
        const CvBands cvb = cv_bands(train, cv);
        const bool global = cfg.band == BandChoice::cv_global;
        band = cv_band(pred, cvb.D_hat, global ? cvb.C_global : cvb.C_local,
                       global ? BandKind::cv_global : BandKind::cv_local, level);
        break;
      }
    }
  } catch (const Error& e) {
    // the point forecast stands without a band
    if (e.kind() != ErrorKind::degenerate_model && e.kind() != ErrorKind::infeasible_fold &&
        e.kind() != ErrorKind::underdetermined_fit)
      throw;
    band_note = e.what();
  }
  return {model, std::move(pred), std::move(band), coarsened, band_note};
}

/// (COVER_j, WIDTH_j) for one day.
inline std::pair<double, double> cover_width(std::span<const double> lower, std::span<const double> upper,
                                             std::span<const double> truth) {
  if (lower.size() != truth.size() || upper.size() != truth.size())
    fail(ErrorKind::invalid_input, "band and truth sizes differ");
  if (truth.empty()) return {0.0, 0.0};
  double in = 0.0, width = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (lower[i] < truth[i] && truth[i] < upper[i]) in += 1.0;
    width += upper[i] - lower[i];
  }
  const double n = static_cast<double>(truth.size());
  return {in / n, width / n};
}

/// RMSE and APE (nullopt when a true value is zero).
inline std::pair<double, std::optional<double>> rmse_ape(std::span<const double> truth,
                                                         std::span<const double> forecast) {
  if (truth.size() != forecast.size() || truth.empty()) fail(ErrorKind::invalid_input, "bad metric inputs");
  double se = 0.0, ape = 0.0;
  bool ape_ok = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = truth[i] - forecast[i];
    se += e * e;
    if (truth[i] == 0.0)
      ape_ok = false;
    else
      ape += std::abs(e) / std::abs(truth[i]);
  }
  const double n = static_cast<double>(truth.size());
  return {std::sqrt(se / n), ape_ok ? std::optional<double>(100.0 * ape / n) : std::nullopt};
}

struct SummaryStats {
  std::size_t count = 0;
  double min = std::numeric_limits<double>::quiet_NaN();
  double q1 = min, median = min, mean = min, q3 = min, max = min;
};

/// Type-7 quantile of sorted values.
inline double quantile7(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::vector<double> v) {
  SummaryStats s;
  s.count = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  s.min = v.front();
  s.max = v.back();
  s.q1 = quantile7(v, 0.25);
  s.median = quantile7(v, 0.5);
  s.q3 = quantile7(v, 0.75);
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / static_cast<double>(v.size());
  return s;
}

struct DayResult {
  std::string date;
  int weekday = 0;
  Dimensions dims;
  bool coarsened = false;
  double rmse = 0.0;
  std::optional<double> ape;
  std::optional<double> cover, width;  // absent without a band
  std::vector<double> times, truth, forecast, lower, upper;
};

struct RunReport {
  std::string label;
  ProtocolConfig config;
  std::vector<DayResult> days;
  std::size_t skipped = 0;       // test days without enough usable history
  std::size_t ape_excluded = 0;  // days with a zero count in the evaluated range

  SummaryStats stats(const std::string& metric) const {
    std::vector<double> v;
    for (const auto& d : days) {
      if (metric == "rmse") v.push_back(d.rmse);
      else if (metric == "ape" && d.ape) v.push_back(*d.ape);
      else if (metric == "cover" && d.cover) v.push_back(*d.cover);
      else if (metric == "width" && d.width) v.push_back(*d.width);
    }
    return summarize(std::move(v));
  }
};

struct EvalReport {
  std::vector<RunReport> runs;
  std::vector<std::string> warnings;
};

/// Evaluates one configuration over the test days of the panel. Days that
/// lack history, or whose model cannot be fitted, are skipped with a
/// warning; the order of days is preserved.
inline RunReport run_protocol(const CurvePanel& panel, const ProtocolConfig& cfg,
                              std::vector<std::string>* warnings = nullptr) {
  cfg.validate();
  panel.validate(true);
  const SplineSpace space = protocol_space(panel, cfg);
  RunReport report{cfg.label(), cfg, {}, 0, 0};
  const auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(report.label + ": " + msg);
  };
  const int first = cfg.first_test_day.value_or(cfg.window_days);
  const int last = cfg.last_test_day.value_or(static_cast<int>(panel.days.size()) - 1);
  for (int idx = std::max(first, 0); idx <= last && idx < static_cast<int>(panel.days.size()); ++idx) {
    const PanelDay& day = panel.days[static_cast<std::size_t>(idx)];
    const std::vector<CurveSample> train = training_days(panel, static_cast<std::size_t>(idx), cfg);
    if (static_cast<int>(train.size()) < cfg.min_training()) {
      warn(day.date + ": only " + std::to_string(train.size()) + " training days; skipped");
      ++report.skipped;
      continue;
    }
    DayResult r;
    r.date = day.date;
    r.weekday = day.weekday;
    for (std::size_t i = 0; i < day.sample.times.size(); ++i)
      if (day.sample.times[i] > cfg.eval_start) {
        r.times.push_back(day.sample.times[i]);
        r.truth.push_back(day.sample.values[i]);
      }
    if (r.times.empty()) {
      warn(day.date + ": no observations after " + format_clock(cfg.eval_start) + "; skipped");
      ++report.skipped;
      continue;
    }
    try {
      const DayForecast f = forecast_day(train, day.sample, space, cfg, mix_seed(cfg.seed, static_cast<std::uint64_t>(idx)));
      r.dims = {f.model.p(), f.model.q()};
      r.coarsened = f.coarsened;
      if (f.coarsened) warn(day.date + ": pre-cut data too short for the left knots; coarsened");
      if (!f.band_note.empty()) warn(day.date + ": no band: " + f.band_note);
      for (double t : r.times) r.forecast.push_back(f.prediction.mean(t));
      if (f.band) {
        for (double t : r.times) {
          r.lower.push_back(f.band->lower(t));
          r.upper.push_back(f.band->upper(t));
        }
        const auto [c, w] = cover_width(r.lower, r.upper, r.truth);
        r.cover = c;
        r.width = w;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_model && e.kind() != ErrorKind::underdetermined_fit &&
          e.kind() != ErrorKind::infeasible_fold)
        throw;
      warn(day.date + ": " + e.what() + "; skipped");
      ++report.skipped;
      continue;
    }
    const auto [rmse, ape] = rmse_ape(r.truth, r.forecast);
    r.rmse = rmse;
    r.ape = ape;
    if (!ape) ++report.ape_excluded;
    report.days.push_back(std::move(r));
  }
  return report;
}

inline EvalReport run_protocols(const CurvePanel& panel, const std::vector<ProtocolConfig>& configs) {
  EvalReport out;
  for (const auto& cfg : configs) out.runs.push_back(run_protocol(panel, cfg, &out.warnings));
  return out;
}

enum class ReportFormat { table, csv, plotdata };

namespace detail {

inline std::string fmt_stat(double v, int precision) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline std::string opt_value(const std::optional<double>& v) { return v ? format_value(*v) : std::string(); }

}  // namespace detail

/// table: six summary statistics per run for each metric; csv: one row per
/// run and day; plotdata: one row per run, day and evaluated interval.
inline void emit_report(const EvalReport& report, ReportFormat format, std::ostream& out) {
  switch (format) {
    case ReportFormat::table: {
      if (report.runs.empty()) return;
      static constexpr const char* metrics[] = {"rmse", "ape", "cover", "width"};
      static constexpr const char* titles[] = {"RMSE", "APE", "COVER", "WIDTH"};
      std::size_t col = 12;
      for (const auto& r : report.runs) col = std::max(col, r.label.size() + 2);
      for (int m = 0; m < 4; ++m) {
        out << std::left << std::setw(10) << titles[m];
        for (const auto& r : report.runs) out << std::right << std::setw(static_cast<int>(col)) << r.label;
        out << '\n';
        const char* rows[] = {"Minimum", "Q1", "Median", "Mean", "Q3", "Maximum"};
        std::vector<SummaryStats> stats;
        for (const auto& r : report.runs) stats.push_back(r.stats(metrics[m]));
        const int prec = m == 2 ? 3 : 2;
        for (int i = 0; i < 6; ++i) {
          out << std::left << std::setw(10) << rows[i];
          for (const auto& s : stats) {
            const double v[] = {s.min, s.q1, s.median, s.mean, s.q3, s.max};
            out << std::right << std::setw(static_cast<int>(col)) << detail::fmt_stat(v[i], prec);
          }
          out << '\n';
        }
        out << std::left << std::setw(10) << "Days";
        for (const auto& s : stats) out << std::right << std::setw(static_cast<int>(col)) << s.count;
        out << "\n\n";
      }
      break;
    }
    case ReportFormat::csv:
      out << "run,date,weekday,p,q,rmse,ape,cover,width\n";
      for (const auto& r : report.runs)
        for (const auto& d : r.days)
          out << r.label << ',' << d.date << ',' << weekday_name(d.weekday) << ',' << d.dims.p << ',' << d.dims.q
              << ',' << format_value(d.rmse) << ',' << detail::opt_value(d.ape) << ','
              << detail::opt_value(d.cover) << ',' << detail::opt_value(d.width) << '\n';
      break;
    case ReportFormat::plotdata:
      out << "run,date,time,truth,forecast,lower,upper\n";
      for (const auto& r : report.runs)
        for (const auto& d : r.days)
          for (std::size_t i = 0; i < d.times.size(); ++i) {
            out << r.label << ',' << d.date << ',' << format_clock(d.times[i]) << ',' << format_value(d.truth[i])
                << ',' << format_value(d.forecast[i]) << ',';
            if (!d.lower.empty()) out << format_value(d.lower[i]) << ',' << format_value(d.upper[i]);
            else out << ',';
            out << '\n';
          }
      break;
  }
}

inline void emit_report(const EvalReport& report, ReportFormat format, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  emit_report(report, format, out);
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

}  // namespace curvecast
