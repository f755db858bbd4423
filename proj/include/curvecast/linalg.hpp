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

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/error.hpp"

namespace curvecast {

struct Pseudoinverse {
  Eigen::Index source_rank = 0;
  Eigen::MatrixXd values;
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& M, const char* what) {
  if (!M.allFinite()) fail(ErrorKind::invalid_matrix, std::string(what) + ": non-finite entries");
}

inline double default_rank_tol(const Eigen::MatrixXd& M) {
  return static_cast<double>(std::max(M.rows(), M.cols())) * std::numeric_limits<double>::epsilon();
}

// Number of singular values d of a factor T whose squares survive the
// default cutoff of pinv(T'T), an n x n matrix. Squared values decide, so a
// direction too weak to register in T'T is dropped here as well.
inline Eigen::Index gram_rank(const Eigen::VectorXd& d, Eigen::Index n) {
  const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
  const double top = d.size() > 0 ? d[0] * d[0] : 0.0;
  Eigen::Index r = 0;
  while (r < d.size() && d[r] > 0.0 && d[r] * d[r] > tol * top) ++r;
  return r;
}

}  // namespace detail

/// Moore-Penrose pseudoinverse by SVD. Singular values at or below
/// rank_tol * sigma_max are treated as zero; the default rank_tol is
/// max(rows, cols) * machine epsilon.
inline Pseudoinverse pinv(const Eigen::MatrixXd& M, std::optional<double> rank_tol = std::nullopt) {
  detail::require_finite(M, "pinv");
  Pseudoinverse out;
  out.values = Eigen::MatrixXd::Zero(M.cols(), M.rows());
  if (M.size() == 0) return out;
  const double tol = rank_tol.value_or(detail::default_rank_tol(M));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s[0] : 0.0);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) {
      out.values.noalias() += svd.matrixV().col(i) * (1.0 / s[i]) * svd.matrixU().col(i).transpose();
      ++out.source_rank;
    }
  }
  return out;
}

struct SymEig {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

inline SymEig sym_eig(const Eigen::MatrixXd& M) {
  detail::require_finite(M, "sym_eig");
  if (M.rows() != M.cols()) fail(ErrorKind::invalid_matrix, "sym_eig: matrix not square");
  const double scale = M.cwiseAbs().maxCoeff();
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300))
    fail(ErrorKind::invalid_matrix, "sym_eig: matrix not symmetric");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const Eigen::Index n = M.rows();
  SymEig out{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = es.eigenvalues()[n - 1 - i];
    out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
  }
  return out;
}

/// Symmetric square root of a symmetric positive definite matrix and its inverse.
struct SymSqrt {
  Eigen::MatrixXd root;
  Eigen::MatrixXd inverse_root;
};

inline SymSqrt sym_sqrt(const Eigen::MatrixXd& M) {
  const SymEig e = sym_eig(M);
  if (e.values.minCoeff() <= 0.0) fail(ErrorKind::invalid_matrix, "sym_sqrt: matrix not positive definite");
  const Eigen::VectorXd r = e.values.cwiseSqrt();
  return {e.vectors * r.asDiagonal() * e.vectors.transpose(),
          e.vectors * r.cwiseInverse().asDiagonal() * e.vectors.transpose()};
}

/// A symmetric pseudoinverse kept as basis * diag(scale) * basis'.
/// Applying it through the factors avoids the rounding of the explicit
/// product, whose entries grow with the inverse of the smallest kept
/// eigenvalue.
struct FactoredPinv {
  Eigen::MatrixXd basis;  // n x r, orthonormal columns
  Eigen::VectorXd scale;  // r

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return basis * scale.cwiseProduct(basis.transpose() * x); }
  Eigen::MatrixXd matrix() const {
    const Eigen::MatrixXd out = basis * scale.asDiagonal() * basis.transpose();
    return 0.5 * (out + out.transpose());
  }
};

/// (C S C')^+ for S = diag(S_diag) > 0 in factored form, computed from
/// the (p+q) x N factor T = S^{1/2} C' through the identity
///   (T'T)^+ = T' ((T T')^+)^2 T.
/// With T = U D V' both sides equal V D^{-2} V', which is what is kept:
/// only the small SVD of T is needed and the conditioning is that of T,
/// not of T T' squared. Holds for every C, including C with linearly
/// dependent columns. The rank is the one pinv would assign to C S C'.
inline FactoredPinv blup_gain_factors(const Eigen::MatrixXd& C, const Eigen::VectorXd& S_diag) {
  detail::require_finite(C, "blup_gain");
  if (S_diag.size() != C.cols()) fail(ErrorKind::invalid_input, "blup_gain: S size mismatch");
  for (Eigen::Index i = 0; i < S_diag.size(); ++i)
    if (!(S_diag[i] > 0.0)) fail(ErrorKind::invalid_variance, "blup_gain: variances must be positive");
  if (C.cols() == 0) return {Eigen::MatrixXd::Zero(C.rows(), 0), Eigen::VectorXd(0)};
  const Eigen::MatrixXd T = S_diag.cwiseSqrt().asDiagonal() * C.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T, Eigen::ComputeThinV);
  const auto& d = svd.singularValues();
  const Eigen::Index r = detail::gram_rank(d, T.cols());
  return {svd.matrixV().leftCols(r), d.head(r).array().square().inverse().matrix()};
}

inline Eigen::MatrixXd blup_gain(const Eigen::MatrixXd& C, const Eigen::VectorXd& S_diag) {
  return blup_gain_factors(C, S_diag).matrix();
}

/// Pseudoinverse of a symmetric matrix in factored form, with the rank
/// cutoff of pinv.
inline FactoredPinv sym_pinv_factors(const Eigen::MatrixXd& M) {
  const SymEig e = sym_eig(M);
  const double top = e.values.size() > 0 ? e.values.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = detail::default_rank_tol(M) * top;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (std::abs(e.values[i]) > cutoff) keep.push_back(i);
  FactoredPinv out{Eigen::MatrixXd(M.rows(), static_cast<Eigen::Index>(keep.size())),
                   Eigen::VectorXd(static_cast<Eigen::Index>(keep.size()))};
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.basis.col(static_cast<Eigen::Index>(j)) = e.vectors.col(keep[j]);
    out.scale[static_cast<Eigen::Index>(j)] = 1.0 / e.values[keep[j]];
  }
  return out;
}

/// C (C'C)^{-1} S^{-1} (C'C)^{-1} C'. Equal to (C S C')^+ only when C has
/// full column rank.
inline Eigen::MatrixXd blup_gain_full_rank(const Eigen::MatrixXd& C, const Eigen::VectorXd& S_diag) {
  for (Eigen::Index i = 0; i < S_diag.size(); ++i)
    if (!(S_diag[i] > 0.0)) fail(ErrorKind::invalid_variance, "blup_gain: variances must be positive");
  const Eigen::MatrixXd CtCi = pinv(C.transpose() * C).values;
  return C * CtCi * S_diag.cwiseInverse().asDiagonal() * CtCi * C.transpose();
}

/// Residuals of the four Penrose conditions for a candidate pseudoinverse P of M.
struct PenroseResiduals {
  double mpm = 0;   // ||M P M - M||
  double pmp = 0;   // ||P M P - P||
  double mp_sym = 0;  // ||(M P)' - M P||
  double pm_sym = 0;  // ||(P M)' - P M||

  double max() const { return std::max({mpm, pmp, mp_sym, pm_sym}); }
};

inline PenroseResiduals penrose_residuals(const Eigen::MatrixXd& M, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd MP = M * P, PM = P * M;
  return {(MP * M - M).norm(), (PM * P - P).norm(), (MP.transpose() - MP).norm(),
          (PM.transpose() - PM).norm()};
}

}  // namespace curvecast
