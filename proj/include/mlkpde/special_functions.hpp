#pragma once

// Scalar functions behind the Korobov kernel and the weight formula.

#include <cmath>
#include <cstdint>
#include <numbers>

#include "mlkpde/errors.hpp"

namespace mlkpde {

/// Bernoulli polynomial B_{2 alpha}(x) on [0, 1], alpha in {1, 2, 3}.
inline double bernoulli_poly(int alpha, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("bernoulli_poly: x outside [0, 1]");
  const double x2 = x * x;
  switch (alpha) {
    case 1:
      return x2 - x + 1.0 / 6.0;
    case 2:
      return x2 * x2 - 2.0 * x2 * x + x2 - 1.0 / 30.0;
    case 3:
      return x2 * x2 * x2 - 3.0 * x2 * x2 * x + 2.5 * x2 * x2 - 0.5 * x2 + 1.0 / 42.0;
    default:
      throw DomainError("bernoulli_poly: alpha must be 1, 2 or 3");
  }
}

/// One-dimensional kernel factor (-1)^{alpha+1} (2 pi)^{2 alpha} / (2 alpha)! B_{2 alpha}(t).
inline double omega(int alpha, double t) {
  const double b = bernoulli_poly(alpha, t);
  constexpr double two_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
  switch (alpha) {
    case 1:
      return two_pi_sq / 2.0 * b;
    case 2:
      return -two_pi_sq * two_pi_sq / 24.0 * b;
    default:
      return two_pi_sq * two_pi_sq * two_pi_sq / 720.0 * b;
  }
}

/// Riemann zeta for real x > 1: partial sum of the first 99 terms plus the
/// Euler-Maclaurin tail from n = 100 (truncation error far below 1e-12).
inline double riemann_zeta(double x) {
  if (!(x > 1.0)) throw DomainError("riemann_zeta: requires x > 1");
  constexpr int n = 100;
  double sum = 0.0;
  for (int j = n - 1; j >= 1; --j) sum += std::pow(static_cast<double>(j), -x);
  const double nd = n;
  const double p = std::pow(nd, -x);
  double tail = nd * p / (x - 1.0) + 0.5 * p;
  tail += x * p / nd / 12.0;
  tail -= x * (x + 1.0) * (x + 2.0) * p / (nd * nd * nd) / 720.0;
  tail += x * (x + 1.0) * (x + 2.0) * (x + 3.0) * (x + 4.0) * p / std::pow(nd, 5) / 30240.0;
  return sum + tail;
}

/// Stirling number of the second kind from the alternating-sum formula,
/// evaluated exactly in 128-bit integers. Requires 0 <= k <= n <= 20.
inline std::uint64_t stirling2(int n, int k) {
  if (n < 0 || k < 0 || n > 20) throw DomainError("stirling2: requires 0 <= k <= n <= 20");
  if (k > n) throw DomainError("stirling2: k > n");
  if (n == 0) return 1;
  __int128 sum = 0;
  __int128 binom = 1;  // C(k, j)
  for (int j = 0; j <= k; ++j) {
    if (j > 0) binom = binom * (k - j + 1) / j;
    __int128 power = 1;
    for (int e = 0; e < n; ++e) power *= j;
    const __int128 term = binom * power;
    sum += ((k - j) % 2 == 0) ? term : -term;
  }
  __int128 factorial = 1;
  for (int i = 2; i <= k; ++i) factorial *= i;
  return static_cast<std::uint64_t>(sum / factorial);
}

}  // namespace mlkpde
