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
 * @file spline.hpp
 * @brief Clamped B-spline spaces: basis evaluation, knot insertion,
 *        restriction to sub-segments, Gram matrices and Lagrange weights.
 *
 * Knot vectors are clamped: the first and last knot carry multiplicity
 * exactly k (the order), interior knots at most k. Basis functions are
 * right-continuous at interior knots; at the right end of the domain the
 * left limit is used so that evaluation is defined on the closed interval.
 *
 * References:
 * - de Boor, "A Practical Guide to Splines", ch. IX (BSPLVB) and ch. XI
 *   (knot insertion).
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curvecast/error.hpp"

namespace curvecast {

/// Which one-sided limit to use when evaluating at a knot.
enum class Side { left, right };

class KnotVector {
 public:
  KnotVector(std::vector<double> knots, int order)
      : knots_(std::move(knots)), order_(order) {
    validate();
  }

  /// Clamped knot vector over the given strictly increasing breaks
  /// (endpoints included).
  static KnotVector clamped(std::span<const double> breaks, int order) {
    if (breaks.size() < 2) fail(ErrorKind::invalid_knot, "need at least two breaks");
    std::vector<double> t;
    t.reserve(breaks.size() + 2 * static_cast<std::size_t>(order));
    for (int i = 0; i < order - 1; ++i) t.push_back(breaks.front());
    for (double b : breaks) t.push_back(b);
    for (int i = 0; i < order - 1; ++i) t.push_back(breaks.back());
    return KnotVector(std::move(t), order);
  }

  /// `spans` equal knot spans on [a, b].
  static KnotVector clamped_uniform(double a, double b, int spans, int order) {
    if (spans < 1 || !(b > a)) fail(ErrorKind::invalid_knot, "bad uniform layout");
    std::vector<double> breaks(static_cast<std::size_t>(spans) + 1);
    for (int i = 0; i <= spans; ++i) breaks[i] = a + (b - a) * i / spans;
    breaks.back() = b;
    return clamped(breaks, order);
  }

  int order() const noexcept { return order_; }
  int dimension() const noexcept { return static_cast<int>(knots_.size()) - order_; }
  const std::vector<double>& knots() const noexcept { return knots_; }
  double front() const noexcept { return knots_.front(); }
  double back() const noexcept { return knots_.back(); }

  int multiplicity(double x) const {
    auto [lo, hi] = std::equal_range(knots_.begin(), knots_.end(), x);
    return static_cast<int>(hi - lo);
  }

  /// Distinct knot values in increasing order.
  std::vector<double> breaks() const {
    std::vector<double> out;
    for (double t : knots_)
      if (out.empty() || t != out.back()) out.push_back(t);
    return out;
  }

  bool operator==(const KnotVector&) const = default;

 private:
  void validate() const {
    const int k = order_;
    if (k < 1) fail(ErrorKind::invalid_knot, "order must be >= 1");
    for (double t : knots_)
      if (!std::isfinite(t)) fail(ErrorKind::invalid_knot, "non-finite knot");
    if (!std::is_sorted(knots_.begin(), knots_.end()))
      fail(ErrorKind::invalid_knot, "knots must be nondecreasing");
    if (static_cast<int>(knots_.size()) - k < k)
      fail(ErrorKind::invalid_knot, "basis dimension must be >= order");
    if (!(knots_.back() > knots_.front()))
      fail(ErrorKind::invalid_knot, "knot vector spans an empty interval");
    std::size_t i = 0;
    while (i < knots_.size()) {
      std::size_t j = i;
      while (j < knots_.size() && knots_[j] == knots_[i]) ++j;
      const int m = static_cast<int>(j - i);
      const bool boundary = (i == 0) || (j == knots_.size());
      if (boundary && m != k) {
        std::ostringstream os;
        os << "boundary knot " << knots_[i] << " has multiplicity " << m
           << ", expected " << k << " (clamped)";
        fail(ErrorKind::invalid_knot, os.str());
      }
      if (m > k) {
        std::ostringstream os;
        os << "knot " << knots_[i] << " has multiplicity " << m << " > order " << k;
        fail(ErrorKind::invalid_knot, os.str());
      }
      i = j;
    }
  }

  std::vector<double> knots_;
  int order_;
};

/// Order-k B-spline space over a clamped knot vector; the domain is
/// [front knot, back knot].
class SplineSpace {
 public:
  explicit SplineSpace(KnotVector knots) : knots_(std::move(knots)) {}
  SplineSpace(std::vector<double> knots, int order) : knots_(std::move(knots), order) {}

  const KnotVector& knot_vector() const noexcept { return knots_; }
  const std::vector<double>& knots() const noexcept { return knots_.knots(); }
  int order() const noexcept { return knots_.order(); }
  int dimension() const noexcept { return knots_.dimension(); }
  double lower() const noexcept { return knots_.front(); }
  double upper() const noexcept { return knots_.back(); }
  bool contains(double t) const noexcept { return t >= lower() && t <= upper(); }
  std::vector<double> breaks() const { return knots_.breaks(); }

  bool operator==(const SplineSpace&) const = default;

 private:
  KnotVector knots_;
};

class SplineFunction;

namespace detail {

/// Index mu of the nonempty knot span used to evaluate at t, restricted
/// to [order-1, n-1] where n = knots.size() - order.
inline std::size_t find_span(std::span<const double> knots, int order, double t, Side side) {
  const std::ptrdiff_t lo = order - 1;
  const std::ptrdiff_t hi = static_cast<std::ptrdiff_t>(knots.size()) - order - 1;
  std::ptrdiff_t mu;
  if (side == Side::right) {
    mu = std::upper_bound(knots.begin(), knots.end(), t) - knots.begin() - 1;
    if (mu > hi) mu = hi;
    // the clamp above can land on an empty span only at the right end
    while (mu > lo && knots[mu] == knots[mu + 1]) --mu;
  } else {
    mu = std::lower_bound(knots.begin(), knots.end(), t) - knots.begin() - 1;
    if (mu < lo) {
      mu = lo;
      while (mu < hi && knots[mu] == knots[mu + 1]) ++mu;
    }
    if (mu > hi) mu = hi;
  }
  return static_cast<std::size_t>(std::max(mu, lo));
}

/// The `order` nonzero basis values at t on span mu (de Boor's BSPLVB);
/// entry r belongs to basis function mu - order + 1 + r.
inline void nonzero_basis(std::span<const double> knots, int order, std::size_t mu, double t,
                          std::span<double> out) {
  const int k = order;
  std::vector<double> left(k), right(k);
  out[0] = 1.0;
  for (int j = 1; j < k; ++j) {
    left[j] = t - knots[mu + 1 - j];
    right[j] = knots[mu + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

/// de Boor's algorithm on a raw (not necessarily clamped) knot array.
inline double de_boor(std::span<const double> knots, int order, std::span<const double> coeffs,
                      double t, Side side) {
  const int k = order;
  const std::size_t mu = find_span(knots, k, t, side);
  std::vector<double> d(k);
  for (int j = 0; j < k; ++j) d[j] = coeffs[j + mu - k + 1];
  for (int r = 1; r < k; ++r) {
    for (int j = k - 1; j >= r; --j) {
      const std::size_t i = j + mu - k + 1;
      const double alpha = (t - knots[i]) / (knots[i + k - r] - knots[i]);
      d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
    }
  }
  return d[k - 1];
}

/// Single knot insertion (Boehm). Knots and coefficients are updated in place.
inline void insert_one(std::vector<double>& knots, int order, std::vector<double>& coeffs,
                       double x) {
  const int k = order;
  const std::size_t n = coeffs.size();
  const std::size_t mu =
      static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin()) - 1;
  std::vector<double> q(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    if (static_cast<std::ptrdiff_t>(i) <= static_cast<std::ptrdiff_t>(mu) - k + 1) {
      q[i] = coeffs[i];
    } else if (i > mu) {
      q[i] = coeffs[i - 1];
    } else {
      const double alpha = (x - knots[i]) / (knots[i + k - 1] - knots[i]);
      q[i] = alpha * coeffs[i] + (1.0 - alpha) * coeffs[i - 1];
    }
  }
  knots.insert(knots.begin() + static_cast<std::ptrdiff_t>(mu) + 1, x);
  coeffs = std::move(q);
}

}  // namespace detail

class SplineFunction {
 public:
  SplineFunction(SplineSpace space, Eigen::VectorXd coefficients)
      : space_(std::move(space)), coeffs_(std::move(coefficients)) {
    if (coeffs_.size() != space_.dimension())
      fail(ErrorKind::invalid_input, "coefficient count does not match basis dimension");
  }

  const SplineSpace& space() const noexcept { return space_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coeffs_; }

  double operator()(double t) const { return value(t, Side::right); }

  double value(double t, Side side) const {
    check_domain(t);
    // right limit at the right end is undefined; use the left limit
    if (t == space_.upper()) side = Side::left;
    if (t == space_.lower()) side = Side::right;
    return detail::de_boor(space_.knots(), space_.order(),
                           std::span<const double>(coeffs_.data(), coeffs_.size()), t, side);
  }

  /// r-th derivative at t, one-sided at knots. Defined for r < order.
  double derivative(double t, int r, Side side) const {
    check_domain(t);
    const int k = space_.order();
    if (r < 0 || r >= k) fail(ErrorKind::invalid_input, "derivative order out of range");
    if (t == space_.upper()) side = Side::left;
    if (t == space_.lower()) side = Side::right;
    std::vector<double> knots = space_.knots();
    std::vector<double> c(coeffs_.data(), coeffs_.data() + coeffs_.size());
    int order = k;
    for (int step = 0; step < r; ++step) {
      std::vector<double> d(c.size() - 1);
      for (std::size_t i = 0; i + 1 < c.size(); ++i) {
        const double h = knots[i + order] - knots[i + 1];
        d[i] = h > 0.0 ? (order - 1) * (c[i + 1] - c[i]) / h : 0.0;
      }
      knots = std::vector<double>(knots.begin() + 1, knots.end() - 1);
      c = std::move(d);
      --order;
    }
    return detail::de_boor(knots, order, c, t, side);
  }

 private:
  void check_domain(double t) const {
    if (!space_.contains(t)) {
      std::ostringstream os;
      os << "t = " << t << " outside [" << space_.lower() << ", " << space_.upper() << "]";
      fail(ErrorKind::domain, os.str());
    }
  }

  SplineSpace space_;
  Eigen::VectorXd coeffs_;
};

/// All N basis values at t.
inline Eigen::VectorXd eval_basis(const SplineSpace& space, double t) {
  if (!space.contains(t)) {
    std::ostringstream os;
    os << "t = " << t << " outside [" << space.lower() << ", " << space.upper() << "]";
    fail(ErrorKind::domain, os.str());
  }
  const int k = space.order();
  const Side side = t == space.upper() ? Side::left : Side::right;
  const std::size_t mu = detail::find_span(space.knots(), k, t, side);
  std::vector<double> vals(k);
  detail::nonzero_basis(space.knots(), k, mu, t, vals);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.dimension());
  for (int r = 0; r < k; ++r) out[static_cast<Eigen::Index>(mu) - k + 1 + r] = vals[r];
  return out;
}

/// Design matrix: row i holds the basis at ts[i].
inline Eigen::MatrixXd basis_matrix(const SplineSpace& space, std::span<const double> ts) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ts.size()), space.dimension());
  for (std::size_t i = 0; i < ts.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = eval_basis(space, ts[i]).transpose();
  return out;
}

/// Inserts the (sorted) knots one at a time. The represented function is
/// unchanged.
inline SplineFunction insert_knots(const SplineFunction& f, std::span<const double> new_knots) {
  const SplineSpace& sp = f.space();
  const int k = sp.order();
  std::vector<double> knots = sp.knots();
  std::vector<double> c(f.coefficients().data(), f.coefficients().data() + f.coefficients().size());
  for (double x : new_knots) {
    if (!(x >= sp.lower() && x <= sp.upper())) {
      std::ostringstream os;
      os << "knot " << x << " outside the domain";
      fail(ErrorKind::domain, os.str());
    }
    const auto m = std::equal_range(knots.begin(), knots.end(), x);
    if (m.second - m.first >= k) {
      std::ostringstream os;
      os << "inserting " << x << " exceeds multiplicity " << k;
      fail(ErrorKind::invalid_knot, os.str());
    }
    detail::insert_one(knots, k, c, x);
  }
  Eigen::VectorXd coeffs = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  return SplineFunction(SplineSpace(std::move(knots), k), std::move(coeffs));
}

/// Restriction of f to [lower, cut] (Side::left) or [cut, upper]
/// (Side::right): raise the multiplicity of `cut` to k, then truncate.
inline SplineFunction restrict(const SplineFunction& f, double cut, Side side) {
  const SplineSpace& sp = f.space();
  const int k = sp.order();
  if (!(cut > sp.lower() && cut < sp.upper())) {
    std::ostringstream os;
    os << "cut " << cut << " must lie strictly inside (" << sp.lower() << ", " << sp.upper() << ")";
    fail(ErrorKind::domain, os.str());
  }
  const int missing = k - sp.knot_vector().multiplicity(cut);
  const std::vector<double> extra(static_cast<std::size_t>(missing), cut);
  const SplineFunction g = insert_knots(f, extra);
  const auto& t = g.space().knots();
  const std::size_t j =
      static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), cut) - t.begin());
  const auto& c = g.coefficients();
  if (side == Side::left) {
    std::vector<double> knots(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(j) + k);
    return SplineFunction(SplineSpace(std::move(knots), k), c.head(static_cast<Eigen::Index>(j)));
  }
  std::vector<double> knots(t.begin() + static_cast<std::ptrdiff_t>(j), t.end());
  const Eigen::Index n2 = c.size() - static_cast<Eigen::Index>(j);
  return SplineFunction(SplineSpace(std::move(knots), k), c.tail(n2));
}

/// Sub-segment space obtained by restricting `space` at `cut`.
inline SplineSpace restrict_space(const SplineSpace& space, double cut, Side side) {
  return restrict(SplineFunction(space, Eigen::VectorXd::Zero(space.dimension())), cut, side).space();
}

/// Linear map (N_i x N) taking full-space coefficients to sub-segment
/// coefficients.
inline Eigen::MatrixXd restriction_matrix(const SplineSpace& space, double cut, Side side) {
  const int n = space.dimension();
  Eigen::MatrixXd out;
  for (int col = 0; col < n; ++col) {
    const SplineFunction piece =
        restrict(SplineFunction(space, Eigen::VectorXd::Unit(n, col)), cut, side);
    if (col == 0) out.resize(piece.coefficients().size(), n);
    out.col(col) = piece.coefficients();
  }
  return out;
}

/// n-point Gauss-Legendre nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      dp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / dp;
      if (std::abs(z - z1) < 1e-16) break;
    }
    // recompute dp at the converged root
    double p1 = 1.0, p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
    }
    dp = n * (z * p1 - p2) / (z * z - 1.0);
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  return {x, w};
}

/// W = integral of b(s) b(s)' over the domain, by k-point Gauss-Legendre
/// on every nonempty knot span (exact for the degree 2k-2 integrand).
inline Eigen::MatrixXd gram_matrix(const SplineSpace& space) {
  const int k = space.order();
  const int n = space.dimension();
  const auto& t = space.knots();
  const auto [gx, gw] = gauss_legendre(k);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> vals(k);
  for (std::size_t mu = k - 1; mu + 1 < t.size() - (k - 1); ++mu) {
    const double a = t[mu], b = t[mu + 1];
    if (!(b > a)) continue;
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int g = 0; g < k; ++g) {
      const double s = mid + half * gx[g];
      detail::nonzero_basis(t, k, mu, s, vals);
      const Eigen::Index base = static_cast<Eigen::Index>(mu) - k + 1;
      for (int r = 0; r < k; ++r)
        for (int c = 0; c < k; ++c) W(base + r, base + c) += half * gw[g] * vals[r] * vals[c];
    }
  }
  return W;
}

/// Lagrange basis weights l_j(t) for the given distinct nodes.
inline std::vector<double> lagrange_weights(std::span<const double> nodes, double t) {
  const std::size_t k = nodes.size();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j)
      if (nodes[i] == nodes[j]) fail(ErrorKind::invalid_nodes, "duplicate Lagrange nodes");
  std::vector<double> w(k, 1.0);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t r = 0; r < k; ++r)
      if (r != j) w[j] *= (t - nodes[r]) / (nodes[j] - nodes[r]);
  return w;
}

}  // namespace curvecast
