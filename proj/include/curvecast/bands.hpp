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
 * @file bands.hpp
 * @brief Simultaneous confidence bands for the forecast on S2.
 *
 * The band is built in two steps (Knafl, Sacks and Ylvisaker 1985):
 *
 *  1. Simultaneous intervals on a finite grid G that holds every break of
 *     the right-hand knot sequence and k-2 equally spaced points between
 *     successive breaks. The critical value is the (1 - delta) quantile of
 *     max |Z(t)| over G, Z the standardized conditional Gaussian process,
 *     found by seeded Monte Carlo (or bounded by a pairwise inequality).
 *
 *  2. Between two breaks every trajectory of X2 - X2_hat is a polynomial of
 *     order k, so bounding it at the k nodes bounds it on the whole span by
 *     z * D(t), D(t) = sum_j |l_j(t)| sd(t_j) with Lagrange weights l_j.
 *
 * The cross-validated variant replaces z * D(t) by C * D_hat(t), where
 * D_hat is a regression spline of the conditional sd on G and C is the
 * median over folds of the smallest constant covering held-out curves.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/blup.hpp"
#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/linalg.hpp"
#include "curvecast/normal.hpp"
#include "curvecast/random.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

struct BandGrid {
  std::vector<double> points;
  std::vector<double> breaks;
  int nodes_per_span = 0;  // k

  std::size_t spans() const { return breaks.size() - 1; }

  /// Index into `points` of node j (0-based, j < k) of span i.
  std::size_t node_index(std::size_t span, int j) const {
    return span * static_cast<std::size_t>(nodes_per_span - 1) + static_cast<std::size_t>(j);
  }

  std::span<const double> span_nodes(std::size_t span) const {
    return {points.data() + node_index(span, 0), static_cast<std::size_t>(nodes_per_span)};
  }

  /// Span containing t; the last span owns the right end.
  std::size_t span_of(double t) const {
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    std::ptrdiff_t i = (it - breaks.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(spans()) - 1));
  }
};

/// Breaks of the space plus k - 2 equally spaced points inside every span:
/// t_{i,j} = t_i + (j - 1)/(k - 1) (t_{i+1} - t_i).
inline BandGrid build_grid(const SplineSpace& right_space) {
  const int k = right_space.order();
  if (k < 2) fail(ErrorKind::invalid_input, "bands need spline order >= 2");
  BandGrid g{{}, right_space.breaks(), k};
  for (std::size_t i = 0; i + 1 < g.breaks.size(); ++i) {
    const double a = g.breaks[i], b = g.breaks[i + 1];
    for (int j = 0; j < k - 1; ++j) g.points.push_back(j == 0 ? a : a + (b - a) * j / (k - 1));
  }
  g.points.push_back(g.breaks.back());
  return g;
}

/// Covariance of X2 at the grid points: B cond_cov B'.
inline Eigen::MatrixXd grid_covariance(const SplineSpace& right_space, const Eigen::MatrixXd& cond_cov,
                                       const BandGrid& grid) {
  const Eigen::MatrixXd Bg = basis_matrix(right_space, grid.points);
  const Eigen::MatrixXd S = Bg * cond_cov * Bg.transpose();
  return 0.5 * (S + S.transpose());
}

/// Pointwise conditional sd at the grid points.
inline std::vector<double> grid_sd(const Eigen::MatrixXd& grid_cov) {
  std::vector<double> sd(static_cast<std::size_t>(grid_cov.rows()));
  for (Eigen::Index i = 0; i < grid_cov.rows(); ++i) sd[i] = std::sqrt(std::max(grid_cov(i, i), 0.0));
  return sd;
}

struct CriticalValues {
  double global = 0.0;            // z_delta over the whole grid
  double local = 0.0;             // max over spans of the per-span value
  std::vector<double> per_span;   // per-span values (empty without a grid)
  std::vector<std::size_t> excluded;  // zero-variance grid points left out
};

namespace detail {

/// Points whose sd is not negligible relative to the largest one.
inline std::vector<std::size_t> active_points(const std::vector<double>& sd) {
  const double top = sd.empty() ? 0.0 : *std::max_element(sd.begin(), sd.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sd.size(); ++i)
    if (top > 0.0 && sd[i] > 1e-12 * top) out.push_back(i);
  return out;
}

/// Smallest z with empirical P(max > z) <= delta.
inline double upper_quantile(std::vector<double> maxima, double delta) {
  if (maxima.empty()) return 0.0;
  std::sort(maxima.begin(), maxima.end());
  const double n = static_cast<double>(maxima.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil((1.0 - delta) * n));
  idx = std::clamp<std::size_t>(idx, 1, maxima.size()) - 1;
  return maxima[idx];
}

}  // namespace detail

/// Monte Carlo critical values for the standardized conditional process.
/// `groups` lists, for every span, the grid indices of its nodes; pass an
/// empty list for the global value only. Reproducible for a fixed seed.
inline CriticalValues simulate_critical_values(const Eigen::MatrixXd& grid_cov,
                                               const std::vector<std::vector<std::size_t>>& groups,
                                               double delta, std::size_t n_sims, std::uint64_t seed) {
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::usage, "delta must lie in (0, 1)");
  if (n_sims == 0) fail(ErrorKind::usage, "need at least one simulation");
  const std::vector<double> sd = grid_sd(grid_cov);
  const std::vector<std::size_t> active = detail::active_points(sd);
  CriticalValues out;
  std::vector<bool> is_active(sd.size(), false);
  for (std::size_t i : active) is_active[i] = true;
  for (std::size_t i = 0; i < sd.size(); ++i)
    if (!is_active[i]) out.excluded.push_back(i);
  out.per_span.assign(groups.size(), 0.0);
  if (active.empty()) return out;

  const Eigen::Index n = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd R(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      R(a, b) = grid_cov(active[a], active[b]) / (sd[active[a]] * sd[active[b]]);
  const SymEig e = sym_eig(0.5 * (R + R.transpose()));
  const Eigen::MatrixXd F = e.vectors * e.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();

  // local positions of each group's active points
  std::vector<Eigen::Index> position(sd.size(), -1);
  for (Eigen::Index a = 0; a < n; ++a) position[active[a]] = a;
  std::vector<std::vector<Eigen::Index>> local(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i : groups[g])
      if (position[i] >= 0) local[g].push_back(position[i]);

  NormalSource rng(seed);
  std::vector<double> global_max;
  global_max.reserve(n_sims);
  std::vector<std::vector<double>> group_max(groups.size());
  for (auto& v : group_max) v.reserve(n_sims);
  const std::size_t batch = 4096;
  for (std::size_t done = 0; done < n_sims; done += batch) {
    const Eigen::Index b = static_cast<Eigen::Index>(std::min(batch, n_sims - done));
    const Eigen::MatrixXd Z = F * rng.normal_matrix(n, b);
    for (Eigen::Index s = 0; s < b; ++s) {
      global_max.push_back(Z.col(s).cwiseAbs().maxCoeff());
      for (std::size_t g = 0; g < groups.size(); ++g) {
        double m = 0.0;
        for (Eigen::Index a : local[g]) m = std::max(m, std::abs(Z(a, s)));
        group_max[g].push_back(m);
      }
    }
  }
  out.global = detail::upper_quantile(std::move(global_max), delta);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.per_span[g] = local[g].empty() ? 0.0 : detail::upper_quantile(std::move(group_max[g]), delta);
    out.local = std::max(out.local, out.per_span[g]);
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> span_groups(const BandGrid& grid) {
  std::vector<std::vector<std::size_t>> groups(grid.spans());
  for (std::size_t i = 0; i < grid.spans(); ++i)
    for (int j = 0; j < grid.nodes_per_span; ++j) groups[i].push_back(grid.node_index(i, j));
  return groups;
}

/// Global and local critical values on the grid in one simulation pass.
inline CriticalValues critical_values(const Eigen::MatrixXd& grid_cov, const BandGrid& grid, double delta,
                                      std::size_t n_sims, std::uint64_t seed) {
  return simulate_critical_values(grid_cov, span_groups(grid), delta, n_sims, seed);
}

inline double critical_value_global(const Eigen::MatrixXd& grid_cov, double delta, std::size_t n_sims,
                                    std::uint64_t seed) {
  return simulate_critical_values(grid_cov, {}, delta, n_sims, seed).global;
}

inline double critical_value_global(const SegmentedModel& seg, const BandGrid& grid, double delta,
                                    std::size_t n_sims, std::uint64_t seed) {
  return critical_value_global(grid_covariance(seg.right_space, conditional_covariance(seg), grid), delta,
                               n_sims, seed);
}

inline double critical_value_local(const Eigen::MatrixXd& grid_cov, const BandGrid& grid, double delta,
                                   std::size_t n_sims, std::uint64_t seed) {
  return critical_values(grid_cov, grid, delta, n_sims, seed).local;
}

inline double critical_value_local(const SegmentedModel& seg, const BandGrid& grid, double delta,
                                   std::size_t n_sims, std::uint64_t seed) {
  return critical_value_local(grid_covariance(seg.right_space, conditional_covariance(seg), grid), grid,
                              delta, n_sims, seed);
}

/// Upper bound on z_delta from
///   P(max |Z| > a) <= P(|Z_1| > a) + sum P(|Z_i| <= a, |Z_{i+1}| > a)
/// over consecutive grid points. Returns the smallest a (bisection,
/// tolerance 1e-9) whose right-hand side is at most delta.
inline double inequality_bound(std::span<const double> consecutive_correlations, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) fail(ErrorKind::usage, "delta must lie in (0, 1)");
  for (double r : consecutive_correlations)
    if (!(r >= -1.0 - 1e-12 && r <= 1.0 + 1e-12)) fail(ErrorKind::invalid_input, "correlation outside [-1, 1]");
  const auto rhs = [&](double a) {
    const double tail = 2.0 * normal_cdf(-a);
    double total = tail;
    for (double r : consecutive_correlations) total += std::max((1.0 - tail) - bvn_square(a, r), 0.0);
    return total;
  };
  double lo = 0.0, hi = 1.0;
  while (rhs(hi) > delta) {
    lo = hi;
    hi *= 2.0;
    if (hi > 64.0) break;
  }
  while (hi - lo > 1e-9) {
    const double mid = 0.5 * (lo + hi);
    (rhs(mid) > delta ? lo : hi) = mid;
  }
  return hi;
}

/// Inequality bound from a grid covariance; zero-variance points are skipped.
inline double inequality_bound(const Eigen::MatrixXd& grid_cov, double delta) {
  const std::vector<double> sd = grid_sd(grid_cov);
  const std::vector<std::size_t> active = detail::active_points(sd);
  std::vector<double> corr;
  for (std::size_t i = 1; i < active.size(); ++i) {
    const std::size_t a = active[i - 1], b = active[i];
    corr.push_back(std::clamp(grid_cov(a, b) / (sd[a] * sd[b]), -1.0, 1.0));
  }
  return inequality_bound(corr, delta);
}

/// D(t) = sum_j |l_j(t)| sd(t_{i,j}) on the span containing t.
struct LagrangeEnvelope {
  BandGrid grid;
  std::vector<double> node_sd;

  double operator()(double t) const {
    const std::size_t i = grid.span_of(t);
    const auto nodes = grid.span_nodes(i);
    const std::vector<double> w = lagrange_weights(nodes, t);
    double d = 0.0;
    for (int j = 0; j < grid.nodes_per_span; ++j) d += std::abs(w[j]) * node_sd[grid.node_index(i, j)];
    return d;
  }
};

enum class BandKind { global, local, cv_global, cv_local };

inline const char* to_string(BandKind k) {
  switch (k) {
    case BandKind::global: return "global";
    case BandKind::local: return "local";
    case BandKind::cv_global: return "cv_global";
    case BandKind::cv_local: return "cv_local";
  }
  return "?";
}

/// center(t) +/- critical_value * spread(t) on S2, where the spread is either
/// a Lagrange envelope or a cross-validated regression spline D_hat.
class Band {
 public:
  Band(SplineFunction center, std::variant<LagrangeEnvelope, SplineFunction> spread, double critical_value,
       BandKind kind, double level)
      : center_(std::move(center)),
        spread_(std::move(spread)),
        critical_value_(critical_value),
        kind_(kind),
        level_(level) {}

  double center(double t) const { return center_(t); }

  double spread(double t) const {
    return std::visit(
        [t](const auto& s) -> double {
          if constexpr (std::is_same_v<std::decay_t<decltype(s)>, SplineFunction>)
            return std::max(s(t), 0.0);
          else
            return s(t);
        },
        spread_);
  }

  double half_width(double t) const { return critical_value_ * spread(t); }
  double lower(double t) const { return center(t) - half_width(t); }
  double upper(double t) const { return center(t) + half_width(t); }

  BandKind kind() const { return kind_; }
  double level() const { return level_; }
  double critical_value() const { return critical_value_; }
  const SplineFunction& center_function() const { return center_; }

 private:
  SplineFunction center_;
  std::variant<LagrangeEnvelope, SplineFunction> spread_;
  double critical_value_;
  BandKind kind_;
  double level_;
};

/// X_hat +/- z D(t), with D built from the forecast's conditional sd at the
/// grid nodes.
inline Band envelope(const BandGrid& grid, const Prediction& pred, double z, BandKind kind = BandKind::global,
                     double level = 0.95) {
  if (!(z > 0.0)) fail(ErrorKind::usage, "critical value must be positive");
  const Eigen::MatrixXd cov = grid_covariance(pred.mean.space(), pred.cond_cov, grid);
  return Band(pred.mean, LagrangeEnvelope{grid, grid_sd(cov)}, z, kind, level);
}

/// Regression spline (order k, knots of S2) through the conditional sd
/// evaluated on the band grid.
inline SplineFunction sd_profile(const SplineSpace& right_space, const Eigen::MatrixXd& cond_cov) {
  const BandGrid grid = build_grid(right_space);
  const std::vector<double> sd = grid_sd(grid_covariance(right_space, cond_cov, grid));
  return fit_regression_spline(CurveSample{grid.points, sd, "sd"}, right_space);
}

/// Largest unconditional sd on the band grid of S2; conditional spreads
/// below 1e-6 of it count as zero.
inline double spread_scale(const SegmentedModel& seg) {
  const BandGrid grid = build_grid(seg.right_space);
  const Eigen::MatrixXd cov =
      seg.g22 + seg.B2 * seg.full.Sigma_diag.asDiagonal() * seg.B2.transpose();
  const std::vector<double> sd = grid_sd(grid_covariance(seg.right_space, cov, grid));
  return sd.empty() ? 0.0 : *std::max_element(sd.begin(), sd.end());
}

/// Fails with degenerate_model when the spread is zero everywhere on the
/// grid, which happens when the observed start identifies the factors
/// exactly (p + q <= N1 with q = 0 or [A1 | B1] injective under BLUP).
inline void require_spread(const std::vector<double>& spread_on_grid, double scale) {
  const double top = spread_on_grid.empty() ? 0.0 : *std::max_element(spread_on_grid.begin(), spread_on_grid.end());
  if (!(top > 1e-6 * scale))
    fail(ErrorKind::degenerate_model,
         "conditional variance vanishes on S2; the observed start identifies the forecast, so no band can be "
         "formed (use ridge, or more components than the left basis dimension)");
}

/// What held-out curves are compared against in cross-validation.
enum class CvTarget {
  grid,          // regression-spline fit of the held-out curve, on the band grid
  observations,  // raw held-out observations after `eval_after`
};

struct CvConfig {
  SplineSpace space;
  double cut = 0.0;
  DimensionRule dims;
  Method method = Method::blup;
  double ridge_sigma2 = 0.0;  // <= 0: use the fitted model's sigma2
  int folds = 10;
  double delta = 0.05;
  CvTarget target = CvTarget::grid;
  std::optional<double> eval_after;          // observations target: t > eval_after (default cut)
  std::optional<std::uint64_t> shuffle_seed;  // round-robin by input order when unset
};

struct CvBands {
  double C_global = 0.0;
  double C_local = 0.0;
  std::vector<double> fold_global;
  std::vector<double> fold_local;
  SplineFunction D_hat;  // from the model fitted on all curves
};

/// Smallest constants that cover held-out residual ratios. Row i holds
/// |Y_i(t) - X_hat_i(t)| / D_hat(t) over the evaluation points of curve i.
/// C_global is the infimum of c with more than (1 - delta) of the rows
/// below c everywhere; C_local the infimum with more than (1 - delta) of
/// the rows below c at every point.
inline std::pair<double, double> cv_constants(const std::vector<std::vector<double>>& ratios, double delta) {
  const std::size_t m = ratios.size();
  if (m == 0) fail(ErrorKind::infeasible_fold, "empty fold");
  // smallest count strictly above (1 - delta) m
  const std::size_t need = static_cast<std::size_t>(std::floor((1.0 - delta) * static_cast<double>(m))) + 1;
  if (need > m) fail(ErrorKind::infeasible_fold, "fold too small for the requested level");
  std::vector<double> row_max(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (double r : ratios[i]) row_max[i] = std::max(row_max[i], r);
  std::sort(row_max.begin(), row_max.end());
  const double c_global = row_max[need - 1];
  const std::size_t points = ratios.front().size();
  double c_local = 0.0;
  std::vector<double> column(m);
  for (std::size_t t = 0; t < points; ++t) {
    for (std::size_t i = 0; i < m; ++i) {
      if (ratios[i].size() != points) fail(ErrorKind::invalid_input, "ragged residual matrix");
      column[i] = ratios[i][t];
    }
    std::nth_element(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(need - 1), column.end());
    c_local = std::max(c_local, column[need - 1]);
  }
  return {c_global, c_local};
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Eigen::MatrixXd forecast_covariance(const SegmentedModel& seg, Method method, double ridge_sigma2) {
  const SplineFunction at_mean(seg.left_space, seg.mu1);
  return forecast(seg, at_mean, method, ridge_sigma2).cond_cov;
}

}  // namespace detail

/// Residual ratios of held-out curves against a model segmented at the cut.
inline std::vector<std::vector<double>> cv_ratios(const SegmentedModel& seg, const SplineFunction& d_hat,
                                                   std::span<const CurveSample> held_out, const CvConfig& cfg) {
  const BandGrid grid = build_grid(seg.right_space);
  const double after = cfg.eval_after.value_or(cfg.cut);
  double top = 0.0;
  for (double t : grid.points) top = std::max(top, d_hat(t));
  std::vector<std::vector<double>> out;
  for (const CurveSample& c : held_out) {
    const SplineFunction y1 = fit_with_coarsening(c.window(cfg.space.lower(), cfg.cut), seg.left_space);
    const Prediction pred = forecast(seg, y1, cfg.method, cfg.ridge_sigma2);
    std::vector<double> ts, truth;
    if (cfg.target == CvTarget::grid) {
      const SplineFunction full = fit_with_coarsening(c, cfg.space);
      ts = grid.points;
      for (double t : ts) truth.push_back(full(t));
    } else {
      for (std::size_t i = 0; i < c.times.size(); ++i)
        if (c.times[i] > after && c.times[i] <= cfg.space.upper()) {
          ts.push_back(c.times[i]);
          truth.push_back(c.values[i]);
        }
    }
    std::vector<double> row;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double d = std::max(d_hat(ts[i]), 0.0);
      const double resid = std::abs(truth[i] - pred.mean(ts[i]));
      // points where the spread vanishes carry no information about the scale
      if (d <= 1e-12 * top) continue;
      row.push_back(resid / d);
    }
    out.push_back(std::move(row));
  }
  return out;
}

/// K-fold cross-validated band constants.
inline CvBands cv_bands(std::span<const CurveSample> curves, const CvConfig& cfg) {
  const std::size_t m = curves.size();
  if (cfg.folds < 2) fail(ErrorKind::usage, "need at least two folds");
  if (m < static_cast<std::size_t>(cfg.folds)) {
    std::ostringstream os;
    os << "need at least " << cfg.folds << " curves for " << cfg.folds << "-fold cross-validation, got " << m;
    fail(ErrorKind::infeasible_fold, os.str());
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle_seed) {
    NormalSource rng(*cfg.shuffle_seed);
    for (std::size_t i = m; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
  }
  CvBands out{0.0, 0.0, {}, {}, SplineFunction(cfg.space, Eigen::VectorXd::Zero(cfg.space.dimension()))};
  for (int f = 0; f < cfg.folds; ++f) {
    std::vector<CurveSample> train, test;
    for (std::size_t pos = 0; pos < m; ++pos)
      (static_cast<int>(pos % static_cast<std::size_t>(cfg.folds)) == f ? test : train).push_back(curves[order[pos]]);
    const CurveModel model = estimate_model(train, cfg.space, cfg.dims);
    const SegmentedModel seg = segment(model, cfg.cut);
    const SplineFunction d_hat =
        sd_profile(seg.right_space, detail::forecast_covariance(seg, cfg.method, cfg.ridge_sigma2));
    std::vector<double> on_grid;
    for (double t : build_grid(seg.right_space).points) on_grid.push_back(d_hat(t));
    require_spread(on_grid, spread_scale(seg));
    const auto ratios = cv_ratios(seg, d_hat, test, cfg);
    for (const auto& row : ratios)
      if (row.empty()) {
        std::ostringstream os;
        os << "fold " << f << " has a held-out curve with no usable evaluation point";
        fail(ErrorKind::infeasible_fold, os.str());
      }
    const auto [cg, cl] = cv_constants(ratios, cfg.delta);
    out.fold_global.push_back(cg);
    out.fold_local.push_back(cl);
  }
  out.C_global = detail::median(out.fold_global);
  out.C_local = detail::median(out.fold_local);
  const CurveModel model = estimate_model(curves, cfg.space, cfg.dims);
  const SegmentedModel seg = segment(model, cfg.cut);
  out.D_hat = sd_profile(seg.right_space, detail::forecast_covariance(seg, cfg.method, cfg.ridge_sigma2));
  return out;
}

/// X_hat +/- C D_hat for a cross-validated constant.
inline Band cv_band(const Prediction& pred, const SplineFunction& d_hat, double c, BandKind kind, double level) {
  return Band(pred.mean, d_hat, c, kind, level);
}

}  // namespace curvecast
