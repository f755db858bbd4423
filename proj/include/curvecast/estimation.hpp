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
 * @file estimation.hpp
 * @brief Estimating the factor model Y(t) = b(t)'(mu + A h + B eps) from
 *        historical curves: per-curve regression splines, then PCA of the
 *        coefficient vectors in the L2 (Gram) inner product.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/error.hpp"
#include "curvecast/linalg.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

/// Discretely observed curve.
struct CurveSample {
  std::vector<double> times;
  std::vector<double> values;
  std::string day_id;

  void validate() const {
    if (times.size() != values.size()) fail(ErrorKind::invalid_input, "times/values length mismatch");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) fail(ErrorKind::invalid_input, "sample times must increase strictly");
  }

  /// Sub-sample with lo <= t <= hi.
  CurveSample window(double lo, double hi) const {
    CurveSample out{{}, {}, day_id};
    for (std::size_t i = 0; i < times.size(); ++i)
      if (times[i] >= lo && times[i] <= hi) {
        out.times.push_back(times[i]);
        out.values.push_back(values[i]);
      }
    return out;
  }
};

/// Estimated (or known) functional model over the full segment. Columns of
/// [A | B] are orthonormal in the Gram inner product W.
struct CurveModel {
  SplineSpace space;
  Eigen::VectorXd mu;
  Eigen::MatrixXd A;
  Eigen::VectorXd L_diag;
  Eigen::MatrixXd B;
  Eigen::VectorXd Sigma_diag;
  double sigma2 = 0.0;

  int p() const { return static_cast<int>(A.cols()); }
  int q() const { return static_cast<int>(B.cols()); }

  SplineFunction mean() const { return SplineFunction(space, mu); }

  /// Covariance of the coefficient vector of X: A L A'.
  Eigen::MatrixXd factor_covariance() const { return A * L_diag.asDiagonal() * A.transpose(); }

  /// Covariance of the coefficient vector of Y: A L A' + B Sigma B'.
  Eigen::MatrixXd covariance() const {
    return factor_covariance() + B * Sigma_diag.asDiagonal() * B.transpose();
  }

  void validate() const {
    const Eigen::Index n = space.dimension();
    if (mu.size() != n || A.rows() != n || B.rows() != n)
      fail(ErrorKind::invalid_input, "model dimensions do not match the spline space");
    if (L_diag.size() != A.cols() || Sigma_diag.size() != B.cols())
      fail(ErrorKind::invalid_input, "variance vector sizes do not match loadings");
    if (A.cols() + B.cols() > n) fail(ErrorKind::invalid_input, "p + q exceeds the basis dimension");
    for (Eigen::Index i = 0; i < L_diag.size(); ++i) {
      if (!(L_diag[i] > 0.0)) fail(ErrorKind::invalid_variance, "L must be strictly positive");
      if (i > 0 && L_diag[i] > L_diag[i - 1]) fail(ErrorKind::invalid_input, "L must be descending");
    }
    for (Eigen::Index i = 0; i < Sigma_diag.size(); ++i) {
      if (!(Sigma_diag[i] > 0.0)) fail(ErrorKind::invalid_variance, "Sigma must be strictly positive");
      if (i > 0 && Sigma_diag[i] > Sigma_diag[i - 1])
        fail(ErrorKind::invalid_input, "Sigma must be descending");
    }
    if (!(sigma2 >= 0.0)) fail(ErrorKind::invalid_variance, "sigma2 must be nonnegative");
  }
};

/// Least-squares regression spline of the sample in `space`.
inline SplineFunction fit_regression_spline(const CurveSample& sample, const SplineSpace& space) {
  sample.validate();
  const Eigen::Index n = space.dimension();
  if (static_cast<Eigen::Index>(sample.times.size()) < n) {
    std::ostringstream os;
    os << "regression spline needs at least " << n << " points, got " << sample.times.size();
    fail(ErrorKind::underdetermined_fit, os.str());
  }
  const Eigen::MatrixXd X = basis_matrix(space, sample.times);
  const Eigen::VectorXd y =
      Eigen::Map<const Eigen::VectorXd>(sample.values.data(), static_cast<Eigen::Index>(sample.values.size()));
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < n) {
    std::ostringstream os;
    os << "design matrix has rank " << qr.rank() << " < " << n << "; coarsen the knots";
    fail(ErrorKind::underdetermined_fit, os.str());
  }
  return SplineFunction(space, qr.solve(y));
}

/// Candidate space obtained by dropping every other interior break, used
/// when a short sample cannot support the full basis.
inline std::optional<SplineSpace> coarsen(const SplineSpace& space) {
  const auto br = space.breaks();
  if (br.size() <= 2) return std::nullopt;
  std::vector<double> kept{br.front()};
  for (std::size_t i = 1; i + 1 < br.size(); ++i)
    if (i % 2 == 0) kept.push_back(br[i]);
  kept.push_back(br.back());
  return SplineSpace(KnotVector::clamped(kept, space.order()));
}

/// Regression spline in `space`; when the design is rank deficient the
/// fit is done in successively coarser subspaces and re-expressed in
/// `space` by knot insertion. `coarsened` reports whether that happened.
inline SplineFunction fit_with_coarsening(const CurveSample& sample, const SplineSpace& space,
                                          bool* coarsened = nullptr) {
  if (coarsened) *coarsened = false;
  std::optional<SplineSpace> current = space;
  while (current) {
    try {
      SplineFunction f = fit_regression_spline(sample, *current);
      if (*current == space) return f;
      if (coarsened) *coarsened = true;
      // knots of `space` missing from the coarse space
      std::vector<double> extra;
      const auto& fine = space.knots();
      const auto& coarse = current->knots();
      std::set_difference(fine.begin(), fine.end(), coarse.begin(), coarse.end(),
                          std::back_inserter(extra));
      return insert_knots(f, extra);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::underdetermined_fit) throw;
      current = coarsen(*current);
    }
  }
  fail(ErrorKind::underdetermined_fit, "too few observations even for a single polynomial piece");
}

/// Dimensions of the factor space (p) and noise space (q).
struct Dimensions {
  int p = 1;
  int q = 0;
};

/// p is the smallest count whose cumulative share of the positive
/// eigenvalue mass reaches `threshold`; p + q is the smallest count
/// reaching (1 + threshold) / 2.
inline Dimensions select_dimensions(std::span<const double> eigenvalues, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorKind::usage, "threshold must lie in (0, 1)");
  double total = 0.0;
  for (double v : eigenvalues) total += std::max(v, 0.0);
  if (!(total > 0.0)) fail(ErrorKind::degenerate_model, "no positive eigenvalue");
  const double second = 0.5 * (1.0 + threshold);
  const double slack = 1e-12;
  int p = 0, pq = 0;
  double cum = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    cum += std::max(eigenvalues[i], 0.0);
    const double share = cum / total;
    if (p == 0 && share >= threshold - slack) p = static_cast<int>(i) + 1;
    if (pq == 0 && share >= second - slack) {
      pq = static_cast<int>(i) + 1;
      break;
    }
  }
  if (p == 0) p = static_cast<int>(eigenvalues.size());
  if (pq == 0) pq = static_cast<int>(eigenvalues.size());
  return {p, std::max(pq - p, 0)};
}

/// Eigen-decomposition of the coefficient covariance in the W metric.
struct CoefficientPca {
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd loadings;     // W-orthonormal columns, one per eigenvalue
  double degeneracy_tol = 0.0;  // eigenvalues at or below this count as zero
};

inline CoefficientPca coefficient_pca(const Eigen::MatrixXd& coeffs, const SplineSpace& space) {
  const Eigen::Index m = coeffs.rows(), n = coeffs.cols();
  if (m < 2) fail(ErrorKind::invalid_input, "functional PCA needs at least two curves");
  if (n != space.dimension()) fail(ErrorKind::invalid_input, "coefficient width does not match space");
  CoefficientPca out;
  out.mean = coeffs.colwise().mean().transpose();
  const Eigen::MatrixXd centered = coeffs.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(m - 1);
  const SymSqrt w = sym_sqrt(gram_matrix(space));
  Eigen::MatrixXd M = w.root * cov * w.root;
  M = 0.5 * (M + M.transpose());
  const SymEig e = sym_eig(M);
  out.eigenvalues = e.values;
  out.loadings = w.inverse_root * e.vectors;
  const double eps = std::numeric_limits<double>::epsilon();
  const double scale = coeffs.cwiseAbs().maxCoeff();
  const double wnorm = w.root.norm();
  out.degeneracy_tol = std::max(static_cast<double>(n) * eps * std::max(e.values[0], 0.0),
                                std::pow(static_cast<double>(n) * eps * scale * wnorm, 2));
  return out;
}

/// Builds the model from the first p + q principal components.
inline CurveModel model_from_pca(const CoefficientPca& pca, const SplineSpace& space, Dimensions dims) {
  const Eigen::Index n = space.dimension();
  const int p = dims.p, q = dims.q;
  if (p < 1 || q < 0 || p + q > n) fail(ErrorKind::usage, "invalid (p, q)");
  for (int i = 0; i < p + q; ++i) {
    if (pca.eigenvalues[i] <= pca.degeneracy_tol) {
      std::ostringstream os;
      os << "component " << i + 1 << " has eigenvalue " << pca.eigenvalues[i]
         << " (zero variance); cannot retain p=" << p << ", q=" << q;
      fail(ErrorKind::degenerate_model, os.str());
    }
  }
  CurveModel model{space,
                   pca.mean,
                   pca.loadings.leftCols(p),
                   pca.eigenvalues.head(p),
                   pca.loadings.middleCols(p, q),
                   pca.eigenvalues.segment(p, q),
                   0.0};
  const Eigen::Index rest = n - p - q;
  if (rest > 0) model.sigma2 = std::max(pca.eigenvalues.tail(rest).mean(), 0.0);
  return model;
}

/// PCA on the coefficient rows (one curve per row) with fixed dimensions.
inline CurveModel functional_pca(const Eigen::MatrixXd& coeffs, const SplineSpace& space, int p, int q) {
  const Eigen::Index m = coeffs.rows();
  if (m < 2) fail(ErrorKind::invalid_input, "functional PCA needs at least two curves");
  if (p < 1 || q < 0) fail(ErrorKind::usage, "need p >= 1 and q >= 0");
  if (p + q > std::min<Eigen::Index>(m - 1, space.dimension())) {
    std::ostringstream os;
    os << "p + q = " << p + q << " exceeds min(m - 1, N) = "
       << std::min<Eigen::Index>(m - 1, space.dimension());
    fail(ErrorKind::usage, os.str());
  }
  return model_from_pca(coefficient_pca(coeffs, space), space, {p, q});
}

/// How to pick (p, q) when estimating from data.
struct DimensionRule {
  std::optional<Dimensions> fixed;  // explicit override
  double threshold = 0.90;          // explained-variance rule otherwise
};

inline Dimensions resolve_dimensions(const CoefficientPca& pca, Eigen::Index curves, const DimensionRule& rule) {
  const Eigen::Index cap = std::min<Eigen::Index>(curves - 1, pca.eigenvalues.size());
  Dimensions d;
  if (rule.fixed) {
    d = *rule.fixed;
  } else {
    std::vector<double> ev(pca.eigenvalues.data(), pca.eigenvalues.data() + pca.eigenvalues.size());
    d = select_dimensions(ev, rule.threshold);
  }
  if (d.p > cap) d.p = static_cast<int>(cap);
  if (d.p + d.q > cap) d.q = static_cast<int>(cap) - d.p;
  // drop trailing components with no variance
  while (d.q > 0 && pca.eigenvalues[d.p + d.q - 1] <= pca.degeneracy_tol) --d.q;
  return d;
}

/// Fitted coefficient rows for a set of samples.
inline Eigen::MatrixXd fit_coefficients(std::span<const CurveSample> samples, const SplineSpace& space) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), space.dimension());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = fit_regression_spline(samples[i], space).coefficients().transpose();
  return out;
}

/// Full estimation path: regression spline per curve, then functional PCA.
inline CurveModel estimate_model(std::span<const CurveSample> samples, const SplineSpace& space,
                                 const DimensionRule& rule = {}) {
  if (samples.size() < 2) fail(ErrorKind::no_data, "need at least two curves to estimate a model");
  const Eigen::MatrixXd coeffs = fit_coefficients(samples, space);
  const CoefficientPca pca = coefficient_pca(coeffs, space);
  const Dimensions d = resolve_dimensions(pca, coeffs.rows(), rule);
  if (d.p < 1) fail(ErrorKind::degenerate_model, "not enough curves for a single factor");
  return model_from_pca(pca, space, d);
}

}  // namespace curvecast
