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
 * @file synth.hpp
 * @brief Known Gaussian curve models, samplers and brute-force oracles.
 *
 * The oracles deliberately avoid the code paths they check: sub-segment
 * coefficients come from least-squares collocation instead of knot
 * insertion, the discrete predictor uses a complete orthogonal
 * decomposition instead of the factored pseudoinverse, and the Monte Carlo
 * conditional law comes from kernel regression on simulated pairs instead
 * of Gaussian conditioning.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/blup.hpp"
#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/panel.hpp"
#include "curvecast/random.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

/// Coefficients mu + A h + B eps with h ~ N(0, L), eps ~ N(0, Sigma).
/// Variances may be zero here (degenerate draws), unlike in CurveModel.
struct SyntheticSpec {
  SplineSpace space;
  Eigen::VectorXd mu;
  Eigen::MatrixXd A;
  Eigen::VectorXd L_diag;
  Eigen::MatrixXd B;
  Eigen::VectorXd Sigma_diag;
  double obs_noise_sd = 0.0;
  std::uint64_t seed = 0;

  static SyntheticSpec from_model(const CurveModel& m, double obs_noise_sd, std::uint64_t seed) {
    return {m.space, m.mu, m.A, m.L_diag, m.B, m.Sigma_diag, obs_noise_sd, seed};
  }

  CurveModel model() const {
    return {space, mu, A, L_diag, B, Sigma_diag, obs_noise_sd * obs_noise_sd};
  }

  void validate() const {
    const Eigen::Index n = space.dimension();
    if (mu.size() != n || A.rows() != n || B.rows() != n || L_diag.size() != A.cols() ||
        Sigma_diag.size() != B.cols())
      fail(ErrorKind::invalid_input, "synthetic spec dimensions do not match");
    if ((L_diag.array() < 0.0).any() || (Sigma_diag.array() < 0.0).any())
      fail(ErrorKind::invalid_variance, "synthetic variances must be nonnegative");
    if (!(obs_noise_sd >= 0.0)) fail(ErrorKind::invalid_variance, "observation noise sd must be nonnegative");
  }
};

struct CurveDraws {
  Eigen::MatrixXd coeffs;   // m x N
  Eigen::MatrixXd factors;  // m x p
  Eigen::MatrixXd noise;    // m x q
};

/// Draws m coefficient vectors; per curve, p factor variates then q noise
/// variates are taken from `rng`.
inline CurveDraws sample_coefficients(const SyntheticSpec& spec, Eigen::Index m, NormalSource& rng) {
  spec.validate();
  if (m < 1) fail(ErrorKind::usage, "need at least one curve");
  const Eigen::Index p = spec.A.cols(), q = spec.B.cols();
  CurveDraws d{Eigen::MatrixXd(m, spec.mu.size()), Eigen::MatrixXd(m, p), Eigen::MatrixXd(m, q)};
  const Eigen::VectorXd sl = spec.L_diag.cwiseSqrt(), ss = spec.Sigma_diag.cwiseSqrt();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) d.factors(i, j) = sl[j] * rng.normal();
    for (Eigen::Index j = 0; j < q; ++j) d.noise(i, j) = ss[j] * rng.normal();
  }
  d.coeffs = (d.factors * spec.A.transpose() + d.noise * spec.B.transpose()).rowwise() + spec.mu.transpose();
  return d;
}

/// Noisy discrete observations of the drawn curves at `times`.
inline std::vector<CurveSample> observe(const SyntheticSpec& spec, const Eigen::MatrixXd& coeffs,
                                        std::span<const double> times, NormalSource& rng) {
  const Eigen::MatrixXd X = basis_matrix(spec.space, times);
  std::vector<CurveSample> out;
  for (Eigen::Index i = 0; i < coeffs.rows(); ++i) {
    const Eigen::VectorXd v = X * coeffs.row(i).transpose();
    CurveSample s{{times.begin(), times.end()}, {}, "curve" + std::to_string(i + 1)};
    for (Eigen::Index j = 0; j < v.size(); ++j) s.values.push_back(v[j] + spec.obs_noise_sd * rng.normal());
    out.push_back(std::move(s));
  }
  return out;
}

struct SyntheticSample {
  CurveDraws draws;
  std::vector<CurveSample> observations;  // empty without an observation grid
};

/// Seeded sampler: coefficients first, then (if `times` is non-empty)
/// observation noise, all from one stream seeded by spec.seed.
inline SyntheticSample sample_curves(const SyntheticSpec& spec, Eigen::Index m, std::span<const double> times = {}) {
  NormalSource rng(spec.seed);
  SyntheticSample s{sample_coefficients(spec, m, rng), {}};
  if (!times.empty()) s.observations = observe(spec, s.draws.coeffs, times, rng);
  return s;
}

/// Panel of consecutive calendar days starting at `start_date`; times are
/// minutes since midnight. Negative observations are clamped to zero and
/// counted in `clamped`.
inline CurvePanel to_panel(const std::vector<CurveSample>& curves, const std::string& start_date,
                           std::size_t* clamped = nullptr) {
  if (curves.empty()) fail(ErrorKind::no_data, "no curves to put in a panel");
  std::vector<std::string> labels;
  for (double t : curves.front().times) labels.push_back(format_clock(t));
  CurvePanel panel = make_panel_grid(labels);
  if (clamped) *clamped = 0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const std::string date = add_days(start_date, static_cast<int>(i));
    PanelDay day{date, weekday_of(date), CurveSample{panel.times, curves[i].values, date}};
    for (double& v : day.sample.values)
      if (v < 0.0) {
        v = 0.0;
        if (clamped) ++*clamped;
      }
    panel.days.push_back(std::move(day));
  }
  return panel;
}

struct RandomModelOptions {
  double L_min = 0.5, L_max = 4.0;
  double Sigma_min = 0.05, Sigma_max = 0.5;
  double mu_scale = 1.0;
  double sigma2 = 0.0;
};

/// Random model with W-orthonormal loadings [A | B] and descending variances.
inline CurveModel random_model(const SplineSpace& space, int p, int q, NormalSource& rng,
                               const RandomModelOptions& opt = {}) {
  const Eigen::Index n = space.dimension();
  if (p < 1 || q < 0 || p + q > n) fail(ErrorKind::usage, "random model needs 1 <= p and p + q <= N");
  const Eigen::MatrixXd G = rng.normal_matrix(n, p + q);
  const Eigen::MatrixXd W = gram_matrix(space);
  const Eigen::MatrixXd M = G.transpose() * W * G;
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  const Eigen::MatrixXd C = llt.matrixU().solve<Eigen::OnTheRight>(G);  // C' W C = I
  const auto draw = [&](int count, double lo, double hi) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(lo + (hi - lo) * rng.uniform());
    std::sort(v.rbegin(), v.rend());
    return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(v.data(), count));
  };
  CurveModel m{space, opt.mu_scale * rng.normal_vector(n), C.leftCols(p), draw(p, opt.L_min, opt.L_max),
               C.rightCols(q), draw(q, opt.Sigma_min, opt.Sigma_max), opt.sigma2};
  return m;
}

/// Sub-segment transfer matrices obtained by collocation: for each side,
/// least-squares solve B_side(ts) R = B_full(ts) at 2k points per span.
struct CollocatedSplit {
  SplineSpace left, right;
  Eigen::MatrixXd R1, R2;
};

inline CollocatedSplit collocated_split(const SplineSpace& space, double cut) {
  const int k = space.order();
  if (!(cut > space.lower() && cut < space.upper())) fail(ErrorKind::domain, "cut outside the open domain");
  std::vector<double> lk, rk;
  for (double t : space.knots())
    if (t < cut) lk.push_back(t);
  for (int i = 0; i < k; ++i) lk.push_back(cut);
  for (int i = 0; i < k; ++i) rk.push_back(cut);
  for (double t : space.knots())
    if (t > cut) rk.push_back(t);
  CollocatedSplit s{SplineSpace(lk, k), SplineSpace(rk, k), {}, {}};
  const auto solve = [&](const SplineSpace& side) {
    std::vector<double> ts;
    const auto br = side.breaks();
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
      for (int j = 0; j < 2 * k; ++j) ts.push_back(br[i] + (br[i + 1] - br[i]) * (j + 0.5) / (2 * k));
    const Eigen::MatrixXd Bs = basis_matrix(side, ts);
    const Eigen::MatrixXd Bf = basis_matrix(space, ts);
    return Eigen::MatrixXd(Bs.colPivHouseholderQr().solve(Bf));
  };
  s.R1 = solve(s.left);
  s.R2 = solve(s.right);
  return s;
}

/// Discrete multivariate predictor m2 + R21 R11^+ (z1 - m1) applied to the
/// coefficient vectors; R21 includes the B2 Sigma B1' term for the noisy form.
inline Eigen::VectorXd discrete_blup_oracle(const SyntheticSpec& spec, double cut, const Eigen::VectorXd& y1,
                                            CovarianceForm form = CovarianceForm::factor) {
  spec.validate();
  const CollocatedSplit s = collocated_split(spec.space, cut);
  if (y1.size() != s.R1.rows()) fail(ErrorKind::invalid_input, "y1 does not match the left sub-segment");
  const Eigen::MatrixXd A1 = s.R1 * spec.A, A2 = s.R2 * spec.A;
  const Eigen::MatrixXd B1 = s.R1 * spec.B, B2 = s.R2 * spec.B;
  const auto L = spec.L_diag.asDiagonal();
  const auto Sg = spec.Sigma_diag.asDiagonal();
  const Eigen::MatrixXd R11 = A1 * L * A1.transpose() + B1 * Sg * B1.transpose();
  Eigen::MatrixXd R21 = A2 * L * A1.transpose();
  if (form == CovarianceForm::noisy) R21 += B2 * Sg * B1.transpose();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(R11);
  cod.setThreshold(1e-10);
  return s.R2 * spec.mu + R21 * cod.solve(Eigen::VectorXd(y1 - s.R1 * spec.mu));
}

/// What is being predicted in the Monte Carlo oracle.
enum class McTarget {
  factor,    // X2 = b(t)'(mu + A h): no B noise on the predicted part
  observed,  // Y2 = b(t)'(mu + A h + B eps)
};

struct McOptions {
  std::size_t n = 100000;
  std::optional<double> bandwidth;  // in whitened coordinates; adaptive when unset
  std::size_t target_effective = 2000;
  McTarget target = McTarget::factor;
  std::uint64_t seed = 1;
};

struct McConditional {
  std::vector<double> times;
  std::vector<double> mean, mean_se;
  std::vector<double> variance, variance_se;
  double bandwidth = 0.0;
  double effective_n = 0.0;
  int dimension = 0;  // dimension of the conditioning coordinates
};

namespace detail {

inline double mean_nn_distance(const Eigen::MatrixXd& U, Eigen::Index count) {
  const Eigen::Index s = std::min(count, U.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < s; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < s; ++j)
      if (j != i) best = std::min(best, (U.col(i) - U.col(j)).squaredNorm());
    total += std::sqrt(best);
  }
  return total / static_cast<double>(s);
}

}  // namespace detail

/// Monte Carlo estimate of the conditional mean and variance of the
/// continuation at `times` given the left coefficients y1.
///
/// Pairs (y1_i, x2_i) are simulated from the spec, y1_i is reduced to
/// whitened coordinates in the span it lives in, and the conditional
/// moments at y1 are estimated by Gaussian-kernel local-linear regression
/// (the local-constant form carries a bias of order h^2 that does not
/// vanish at practical n). Standard errors are sandwich estimates. With no
/// bandwidth given, h starts at half the mean nearest-neighbour distance
/// of the simulated coordinates and doubles until the effective sample
/// size reaches `target_effective`. A query off that span is projected.
inline McConditional mc_conditional(const SyntheticSpec& spec, double cut, const Eigen::VectorXd& y1,
                                    std::span<const double> times, const McOptions& opt = {}) {
  spec.validate();
  if (opt.n < 10000) fail(ErrorKind::usage, "Monte Carlo conditioning needs n >= 10000");
  const CollocatedSplit split = collocated_split(spec.space, cut);
  if (y1.size() != split.R1.rows()) fail(ErrorKind::invalid_input, "y1 does not match the left sub-segment");
  for (double t : times)
    if (!(t >= cut && t <= spec.space.upper())) fail(ErrorKind::domain, "grid time outside the right segment");

  const Eigen::Index n = static_cast<Eigen::Index>(opt.n);
  const Eigen::Index T = static_cast<Eigen::Index>(times.size());
  NormalSource rng(opt.seed);
  const CurveDraws d = sample_coefficients(spec, n, rng);
  const Eigen::MatrixXd Bt = basis_matrix(spec.space, times);  // T x N, full space
  Eigen::MatrixXd target_coeffs = d.factors * spec.A.transpose();
  if (opt.target == McTarget::observed) target_coeffs += d.noise * spec.B.transpose();
  const Eigen::MatrixXd Y = (target_coeffs.rowwise() + spec.mu.transpose()) * Bt.transpose();  // n x T

  // conditioning coordinates: orthonormal basis of span(R1 [A | B])
  Eigen::MatrixXd C(split.R1.rows(), spec.A.cols() + spec.B.cols());
  C << split.R1 * spec.A, split.R1 * spec.B;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(C);
  qr.setThreshold(1e-10);
  const Eigen::Index r = qr.rank();
  const Eigen::MatrixXd Q = Eigen::MatrixXd(qr.householderQ()).leftCols(r);
  const Eigen::MatrixXd dev = (d.coeffs - Eigen::MatrixXd::Ones(n, 1) * spec.mu.transpose()) * split.R1.transpose();
  Eigen::MatrixXd U = Q.transpose() * dev.transpose();  // r x n
  Eigen::VectorXd u0 = Q.transpose() * (y1 - split.R1 * spec.mu);
  McConditional out;
  out.times.assign(times.begin(), times.end());
  out.dimension = static_cast<int>(r);

  if (r > 0) {
    const Eigen::MatrixXd cov = U * U.transpose() / static_cast<double>(n);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) fail(ErrorKind::unreliable_estimate, "degenerate conditioning coordinates");
    U = llt.matrixL().solve(U);
    u0 = llt.matrixL().solve(u0);
  }

  Eigen::VectorXd sq(n);
  for (Eigen::Index i = 0; i < n; ++i) sq[i] = (U.col(i) - u0).squaredNorm();
  const auto weights_for = [&](double h) {
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::exp(-0.5 * sq[i] / (h * h));
    return w;
  };
  const auto effective = [](const Eigen::VectorXd& w) {
    const double s2 = w.squaredNorm();
    return s2 > 0.0 ? w.sum() * w.sum() / s2 : 0.0;
  };

  Eigen::VectorXd w;
  double h = 0.0;
  if (r == 0) {
    w = Eigen::VectorXd::Ones(n);
  } else if (opt.bandwidth) {
    h = *opt.bandwidth;
    if (!(h > 0.0)) fail(ErrorKind::usage, "bandwidth must be positive");
    w = weights_for(h);
    if (effective(w) < 100.0) {
      std::ostringstream os;
      os << "effective sample size " << effective(w) << " < 100 at bandwidth " << h
         << "; increase n or the bandwidth";
      fail(ErrorKind::unreliable_estimate, os.str());
    }
  } else {
    const double nn = detail::mean_nn_distance(U, 2000);
    // rescale the subsample spacing to the full sample
    const double ratio = std::min<double>(2000.0, static_cast<double>(n)) / static_cast<double>(n);
    h = 0.5 * nn * std::pow(ratio, 1.0 / static_cast<double>(r));
    w = weights_for(h);
    for (int it = 0; it < 60 && effective(w) < static_cast<double>(opt.target_effective); ++it) {
      h *= 2.0;
      w = weights_for(h);
    }
  }
  out.bandwidth = h;
  out.effective_n = effective(w);
  if (out.effective_n < 100.0) fail(ErrorKind::unreliable_estimate, "effective sample size below 100");

  // weighted least squares on [1, u - u0]
  const Eigen::Index P = r + 1;
  Eigen::MatrixXd X(n, P);
  X.col(0).setOnes();
  if (r > 0) X.rightCols(r) = (U.colwise() - u0).transpose();
  const Eigen::MatrixXd XtW = X.transpose() * w.asDiagonal();
  const Eigen::MatrixXd M = XtW * X;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  const Eigen::MatrixXd beta = ldlt.solve(XtW * Y);  // P x T
  const Eigen::MatrixXd resid = Y - X * beta;
  // row 0 of M^{-1} X' W: the linear weights of the intercept
  const Eigen::VectorXd a = (ldlt.solve(XtW)).row(0).transpose();
  const Eigen::MatrixXd S2 = X.transpose() * w.cwiseProduct(w).asDiagonal() * X;
  const double W1 = w.sum();
  const double dof = W1 - ldlt.solve(S2).trace();
  for (Eigen::Index t = 0; t < T; ++t) {
    out.mean.push_back(beta(0, t));
    out.mean_se.push_back(std::sqrt((a.array().square() * resid.col(t).array().square()).sum()));
    const Eigen::ArrayXd r2 = resid.col(t).array().square();
    const double v = (w.array() * r2).sum() / dof;
    out.variance.push_back(v);
    out.variance_se.push_back(std::sqrt((w.array().square() * (r2 - v).square()).sum()) / dof);
  }
  return out;
}

/// Synthetic call-centre arrivals.
///
/// Weekdays only, counts per interval ending at 07:05, 07:10, ..., 21:05.
/// Each day is weekday_factor * base(t) * (1 + level + tilt * s(t)) +
/// bump * lunch(t) with level, tilt and bump Gaussian, plus N(0, value)
/// count noise, clamped at zero.
struct CallCenterOptions {
  int days = 300;
  std::string start_date = "2003-01-06";  // a Monday
  int interval_minutes = 5;
  double first_label = 425.0;  // 07:05
  double last_label = 1265.0;  // 21:05
  double scale = 1.0;
  double level_sd = 0.15;
  double tilt_sd = 0.10;
  double bump_sd = 8.0;
  std::uint64_t seed = 2003;
};

inline CurvePanel call_center_panel(const CallCenterOptions& opt) {
  if (opt.days < 1 || opt.interval_minutes < 1 || !(opt.last_label > opt.first_label))
    fail(ErrorKind::usage, "bad call-centre layout");
  static constexpr double weekday_factor[7] = {0.0, 1.12, 1.05, 1.0, 0.97, 0.92, 0.0};
  std::vector<std::string> labels;
  for (double t = opt.first_label; t <= opt.last_label + 1e-9; t += opt.interval_minutes)
    labels.push_back(format_clock(t));
  CurvePanel panel = make_panel_grid(labels);
  const double mid = 0.5 * (opt.first_label + opt.last_label);
  const double half = 0.5 * (opt.last_label - opt.first_label);
  NormalSource rng(opt.seed);
  std::string date = opt.start_date;
  for (int made = 0; made < opt.days; date = add_days(date, 1)) {
    const int wd = weekday_of(date);
    if (wd == 0 || wd == 6) continue;
    const double level = opt.level_sd * rng.normal();
    const double tilt = opt.tilt_sd * rng.normal();
    const double bump = opt.bump_sd * rng.normal();
    PanelDay day{date, wd, CurveSample{panel.times, {}, date}};
    for (double t : panel.times) {
      const double base = 10.0 + 60.0 * std::exp(-std::pow((t - 630.0) / 110.0, 2)) +
                          48.0 * std::exp(-std::pow((t - 850.0) / 150.0, 2));
      const double lunch = std::exp(-std::pow((t - 750.0) / 45.0, 2));
      const double rate =
          std::max(opt.scale * (weekday_factor[wd] * base * (1.0 + level + tilt * (t - mid) / half) + bump * lunch),
                   0.0);
      day.sample.values.push_back(std::max(rate + std::sqrt(rate) * rng.normal(), 0.0));
    }
    panel.days.push_back(std::move(day));
    ++made;
  }
  return panel;
}

}  // namespace curvecast
