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
 * @file blup.hpp
 * @brief Best linear unbiased prediction of the continuation of a curve.
 *
 * The model is split at the cut U into S1 = [a, U] and S2 = [U, b]. Mean,
 * loadings and covariances are carried to both pieces by knot insertion
 * (restriction matrices R1, R2), and the prediction of X on S2 given the
 * observed Y on S1 is computed entirely in coefficient space:
 *
 *   x2_hat = mu2 + g21 G11^+ (y1 - mu1),
 *   g_ij = A_i L A_j',   G11 = A1 L A1' + B1 Sigma B1'.
 *
 * Under a Gaussian model x2_hat is the conditional mean E[x2 | y1]; the
 * conditional covariance is g22 - g21 G11^+ g12. With estimated parameters
 * the predictor is an empirical Bayes posterior mean.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/error.hpp"
#include "curvecast/estimation.hpp"
#include "curvecast/linalg.hpp"
#include "curvecast/spline.hpp"

namespace curvecast {

/// How G11^+ is formed when segmenting.
enum class PseudoinverseRoute {
  factored,  // (p+q)-sized route through blup_gain
  direct,    // SVD of the N1 x N1 matrix G11
};

/// Which cross-covariance enters the conditional covariance.
enum class CovarianceForm {
  factor,  // g22 - g21 G11^+ g12  (Cov(x2, y1) = g21)
  noisy,   // g22 - G21 G11^+ G12  (includes the B2 Sigma B1' cross term)
};

enum class Method { blup, ridge, mean };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::blup: return "blup";
    case Method::ridge: return "ridge";
    case Method::mean: return "mean";
  }
  return "?";
}

struct SegmentedModel {
  CurveModel full;
  double cut = 0.0;
  SplineSpace left_space;
  SplineSpace right_space;
  Eigen::MatrixXd R1, R2;  // restriction matrices
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd A1, A2, B1, B2;
  Eigen::MatrixXd W1{}, W2{};
  Eigen::MatrixXd g11{}, g12{}, g21{}, g22{};
  Eigen::MatrixXd G11{}, G12{}, G21{};
  Eigen::MatrixXd G11_pinv{};
  FactoredPinv G11_pinv_factors{};  // the same operator, for applying to vectors
  Eigen::MatrixXd factor_cond_cov{};  // Cov(h | y1), p x p

  int left_dimension() const { return left_space.dimension(); }
  int right_dimension() const { return right_space.dimension(); }
};

namespace detail {

/// Cov(h | y1) for y1 - mu1 = A1 h + B1 e. With C = [A1 | B1],
/// S = diag(L, Sigma) and S^{1/2} C' = U D V', the joint conditional
/// covariance of (h, e) is S^{1/2} (I - U_r U_r') S^{1/2}; its leading
/// p x p block is returned. Positive semidefinite by construction and
/// exactly zero when y1 identifies h.
inline Eigen::MatrixXd factor_posterior(const Eigen::MatrixXd& A1, const Eigen::MatrixXd& B1,
                                        const Eigen::VectorXd& L, const Eigen::VectorXd& Sigma) {
  const Eigen::Index p = A1.cols(), m = A1.cols() + B1.cols();
  Eigen::MatrixXd C(A1.rows(), m);
  C << A1, B1;
  Eigen::VectorXd S(m);
  S << L, Sigma;
  const Eigen::VectorXd root = S.cwiseSqrt();
  const Eigen::MatrixXd T = root.asDiagonal() * C.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T, Eigen::ComputeFullU);
  const Eigen::Index r = gram_rank(svd.singularValues(), T.cols());  // same rank as the gain
  const Eigen::MatrixXd Un = svd.matrixU().rightCols(m - r);  // complement of the observed directions
  const Eigen::MatrixXd F = root.head(p).asDiagonal() * Un.topRows(p);
  return F * F.transpose();
}

}  // namespace detail

inline SegmentedModel segment(const CurveModel& model, double cut,
                              PseudoinverseRoute route = PseudoinverseRoute::factored) {
  model.validate();
  const SplineSpace& sp = model.space;
  if (!(cut > sp.lower() && cut < sp.upper())) {
    std::ostringstream os;
    os << "cut " << cut << " must lie strictly inside (" << sp.lower() << ", " << sp.upper() << ")";
    fail(ErrorKind::domain, os.str());
  }
  const Eigen::MatrixXd R1 = restriction_matrix(sp, cut, Side::left);
  const Eigen::MatrixXd R2 = restriction_matrix(sp, cut, Side::right);
  SegmentedModel s{.full = model,
                   .cut = cut,
                   .left_space = restrict_space(sp, cut, Side::left),
                   .right_space = restrict_space(sp, cut, Side::right),
                   .R1 = R1,
                   .R2 = R2,
                   .mu1 = R1 * model.mu,
                   .mu2 = R2 * model.mu,
                   .A1 = R1 * model.A,
                   .A2 = R2 * model.A,
                   .B1 = R1 * model.B,
                   .B2 = R2 * model.B};
  s.W1 = gram_matrix(s.left_space);
  s.W2 = gram_matrix(s.right_space);
  const auto L = model.L_diag.asDiagonal();
  const auto Sg = model.Sigma_diag.asDiagonal();
  s.g11 = s.A1 * L * s.A1.transpose();
  s.g12 = s.A1 * L * s.A2.transpose();
  s.g21 = s.g12.transpose();
  s.g22 = s.A2 * L * s.A2.transpose();
  s.G11 = s.g11 + s.B1 * Sg * s.B1.transpose();
  s.G11 = 0.5 * (s.G11 + s.G11.transpose());
  s.G12 = s.g12 + s.B1 * Sg * s.B2.transpose();
  s.G21 = s.G12.transpose();
  if (route == PseudoinverseRoute::factored) {
    Eigen::MatrixXd C(s.A1.rows(), s.A1.cols() + s.B1.cols());
    C << s.A1, s.B1;
    Eigen::VectorXd S(model.L_diag.size() + model.Sigma_diag.size());
    S << model.L_diag, model.Sigma_diag;
    s.G11_pinv_factors = blup_gain_factors(C, S);
  } else {
    s.G11_pinv_factors = sym_pinv_factors(s.G11);
  }
  s.G11_pinv = s.G11_pinv_factors.matrix();
  s.factor_cond_cov = detail::factor_posterior(s.A1, s.B1, model.L_diag, model.Sigma_diag);
  return s;
}

/// Point forecast on S2 together with its coefficient-space covariance.
struct Prediction {
  SplineFunction mean;
  Eigen::MatrixXd cond_cov;
  Method method = Method::blup;

  /// b2(t)' cond_cov b2(t), clipped at zero.
  double variance(double t) const {
    const Eigen::VectorXd b = eval_basis(mean.space(), t);
    return std::max(b.dot(cond_cov * b), 0.0);
  }
};

namespace detail {

inline void require_left(const SegmentedModel& seg, const SplineFunction& y1) {
  if (!(y1.space() == seg.left_space))
    fail(ErrorKind::invalid_input, "observed curve is not in the left sub-segment space");
}

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

}  // namespace detail

/// Gain matrix g21 G11^+ (N2 x N1).
inline Eigen::MatrixXd blup_gain_matrix(const SegmentedModel& seg) { return seg.g21 * seg.G11_pinv; }

inline Eigen::MatrixXd conditional_covariance(const SegmentedModel& seg,
                                              CovarianceForm form = CovarianceForm::factor) {
  // equals g22 - g21 G11^+ g12, formed without the cancellation
  if (form == CovarianceForm::factor) return detail::symmetrized(seg.A2 * seg.factor_cond_cov * seg.A2.transpose());
  return detail::symmetrized(seg.g22 - seg.G21 * seg.G11_pinv * seg.G12);
}

inline Prediction predict(const SegmentedModel& seg, const SplineFunction& y1,
                          CovarianceForm form = CovarianceForm::factor) {
  detail::require_left(seg, y1);
  const Eigen::VectorXd coeffs = seg.mu2 + seg.g21 * seg.G11_pinv_factors.apply(y1.coefficients() - seg.mu1);
  return {SplineFunction(seg.right_space, coeffs), conditional_covariance(seg, form), Method::blup};
}

/// Ridge gain A2 (A1'A1 + sigma2 L^{-1})^{-1} A1' (only a p x p inverse).
inline Eigen::MatrixXd ridge_gain(const SegmentedModel& seg, double sigma2) {
  if (!(sigma2 > 0.0)) fail(ErrorKind::invalid_variance, "ridge sigma2 must be positive");
  const Eigen::MatrixXd M =
      seg.A1.transpose() * seg.A1 + sigma2 * Eigen::MatrixXd(seg.full.L_diag.cwiseInverse().asDiagonal());
  return seg.A2 * M.llt().solve(seg.A1.transpose());
}

/// Same gain through the N1 x N1 system g21 (A1 L A1' + sigma2 I)^{-1}.
inline Eigen::MatrixXd ridge_gain_direct(const SegmentedModel& seg, double sigma2) {
  if (!(sigma2 > 0.0)) fail(ErrorKind::invalid_variance, "ridge sigma2 must be positive");
  const Eigen::Index n1 = seg.A1.rows();
  const Eigen::MatrixXd M = seg.g11 + sigma2 * Eigen::MatrixXd::Identity(n1, n1);
  return M.llt().solve(seg.g12).transpose();
}

/// Ridge-regression variant: y1 = mu1 + A1 h + white noise of variance sigma2.
inline Prediction predict_ridge(const SegmentedModel& seg, const SplineFunction& y1, double sigma2) {
  detail::require_left(seg, y1);
  if (!(sigma2 > 0.0)) fail(ErrorKind::invalid_variance, "ridge sigma2 must be positive");
  const Eigen::MatrixXd M =
      seg.A1.transpose() * seg.A1 + sigma2 * Eigen::MatrixXd(seg.full.L_diag.cwiseInverse().asDiagonal());
  const Eigen::LLT<Eigen::MatrixXd> llt(M);
  const Eigen::VectorXd coeffs =
      seg.mu2 + seg.A2 * llt.solve(seg.A1.transpose() * (y1.coefficients() - seg.mu1));
  // posterior covariance of h is sigma2 (A1'A1 + sigma2 L^{-1})^{-1}
  const Eigen::MatrixXd cov = sigma2 * seg.A2 * llt.solve(seg.A2.transpose());
  return {SplineFunction(seg.right_space, coeffs), detail::symmetrized(cov), Method::ridge};
}

/// Forecast from past days only: the mean on S2 with the unconditional
/// covariance g22.
inline Prediction predict_mean(const SegmentedModel& seg) {
  return {SplineFunction(seg.right_space, seg.mu2), detail::symmetrized(seg.g22), Method::mean};
}

/// Dispatches on the forecasting method. For ridge, a nonpositive
/// `ridge_sigma2` falls back to the model's residual variance.
inline Prediction forecast(const SegmentedModel& seg, const SplineFunction& y1, Method method,
                           double ridge_sigma2 = 0.0) {
  switch (method) {
    case Method::blup:
      return predict(seg, y1);
    case Method::ridge:
      return predict_ridge(seg, y1, ridge_sigma2 > 0.0 ? ridge_sigma2 : seg.full.sigma2);
    case Method::mean:
      return predict_mean(seg);
  }
  fail(ErrorKind::usage, "unknown method");
}

/// Full-segment curve assembled from the observed start and the forecast.
struct Concatenation {
  SplineFunction curve;
  std::vector<double> jumps;  // |left - right| derivative jumps at U, orders 0..k-2
  double max_jump = 0.0;
  double residual = 0.0;  // least-squares residual of the merged coefficients
};

/// Merges x1 (on S1) and the forecast (on S2) into one spline on the full
/// space. When the pieces do not join smoothly the least-squares merge is
/// returned and the jumps are reported.
inline Concatenation concatenate(const SegmentedModel& seg, const SplineFunction& x1, const Prediction& pred) {
  detail::require_left(seg, x1);
  if (!(pred.mean.space() == seg.right_space))
    fail(ErrorKind::invalid_input, "forecast is not in the right sub-segment space");
  const Eigen::Index n1 = seg.R1.rows(), n2 = seg.R2.rows(), n = seg.R1.cols();
  Eigen::MatrixXd R(n1 + n2, n);
  R << seg.R1, seg.R2;
  Eigen::VectorXd rhs(n1 + n2);
  rhs << x1.coefficients(), pred.mean.coefficients();
  const Eigen::VectorXd c = R.colPivHouseholderQr().solve(rhs);
  Concatenation out{SplineFunction(seg.full.space, c), {}, 0.0, (R * c - rhs).norm()};
  const int k = seg.full.space.order();
  for (int r = 0; r <= k - 2; ++r) {
    const double left = x1.derivative(seg.cut, r, Side::left);
    const double right = pred.mean.derivative(seg.cut, r, Side::right);
    out.jumps.push_back(std::abs(left - right));
    out.max_jump = std::max(out.max_jump, out.jumps.back());
  }
  return out;
}

/// ||G11 G11^+ (y1 - mu1) - (y1 - mu1)||; zero for curves drawn from the model.
/// G11 is applied as A1 L A1' + B1 Sigma B1' rather than through the stored
/// matrix, whose rounding alone can exceed the residual when G11 is
/// badly conditioned.
inline double pseudo_op_check(const SegmentedModel& seg, const SplineFunction& y1) {
  detail::require_left(seg, y1);
  const Eigen::VectorXd r = y1.coefficients() - seg.mu1;
  const Eigen::VectorXd x = seg.G11_pinv_factors.apply(r);
  const Eigen::VectorXd back = seg.A1 * seg.full.L_diag.cwiseProduct(seg.A1.transpose() * x) +
                               seg.B1 * seg.full.Sigma_diag.cwiseProduct(seg.B1.transpose() * x);
  return (back - r).norm();
}

}  // namespace curvecast
