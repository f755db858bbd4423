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
#include <numbers>

#include "curvecast/spline.hpp"  // gauss_legendre

namespace curvecast {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile by bisection on normal_cdf (used off the hot path).
inline double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// P(X > h, Y > k) for a standard bivariate normal with correlation r.
///
/// Genz (2004), "Numerical computation of rectangular bivariate and
/// trivariate normal and t probabilities": Gauss-Legendre quadrature of
/// Plackett's integral for |r| < 0.925, and an asymptotic expansion plus
/// quadrature of the remainder otherwise. Absolute error about 1e-15.
inline double bvn_upper(double h, double k, double r) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (h == inf || k == inf) return 0.0;
  if (h == -inf) return k == -inf ? 1.0 : normal_cdf(-k);
  if (k == -inf) return normal_cdf(-h);
  r = std::clamp(r, -1.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  const double ar = std::abs(r);
  const int n = ar < 0.3 ? 6 : (ar < 0.75 ? 12 : 20);
  const auto [x, w] = gauss_legendre(n);
  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (int i = 0; i < n; ++i) {
      const double sn = std::sin(asr * (1.0 + x[i]));
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / two_pi + normal_cdf(-h) * normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      const double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0)
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(two_pi) * normal_cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a *= 0.5;
      for (int i = 0; i < n; ++i) {
        const double xs = std::pow(a * (1.0 + x[i]), 2);
        const double rs = std::sqrt(1.0 - xs);
        const double asr1 = -0.5 * (bs / xs + hk);
        if (asr1 > -100.0) {
          const double sp = 1.0 + c * xs * (1.0 + d * xs);
          const double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
          bvn += a * w[i] * std::exp(asr1) * (ep - sp);
        }
      }
      bvn = -bvn / two_pi;
    }
    if (r > 0.0) {
      bvn += normal_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double span = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
      bvn = span - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

/// P(|X| <= a, |Y| <= a) for a standard bivariate normal with correlation r.
inline double bvn_square(double a, double r) {
  // inclusion-exclusion over upper-orthant probabilities
  return bvn_upper(-a, -a, r) - bvn_upper(a, -a, r) - bvn_upper(-a, a, r) + bvn_upper(a, a, r);
}

}  // namespace curvecast
