#pragma once

// Rank-1 lattice rules with power-of-two sizes: point generation, nesting
// across divisors, and component-by-component construction of the
// generating vector.

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mlkpde/errors.hpp"
#include "mlkpde/parallel.hpp"
#include "mlkpde/special_functions.hpp"

namespace mlkpde {

/// N points in [0,1)^s stored point-major.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t n, std::size_t s) : n_(n), s_(s), coords_(n * s, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t dims() const noexcept { return s_; }

  std::span<const double> operator[](std::size_t k) const { return {coords_.data() + k * s_, s_}; }
  std::span<double> operator[](std::size_t k) { return {coords_.data() + k * s_, s_}; }

  friend bool operator==(const PointSet&, const PointSet&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t s_ = 0;
  std::vector<double> coords_;
};

/// Generating vector z for a lattice of N_max points; every power-of-two
/// divisor N of N_max yields a nested sub-lattice.
class EmbeddedLattice {
 public:
  EmbeddedLattice(std::size_t n_max, std::vector<std::uint64_t> z) : n_max_(n_max), z_(std::move(z)) {
    if (n_max_ < 2 || !std::has_single_bit(n_max_))
      throw ParameterError("lattice size must be a power of two >= 2");
    if (z_.empty()) throw ParameterError("generating vector must be non-empty");
    for (auto zj : z_) {
      if (zj == 0 || zj >= n_max_ || zj % 2 == 0)
        throw ParameterError("generating vector components must be odd and in [1, N_max)");
    }
  }

  std::size_t n_max() const noexcept { return n_max_; }
  std::size_t dims() const noexcept { return z_.size(); }
  std::span<const std::uint64_t> z() const noexcept { return z_; }

  /// Same generating vector restricted to the first s components.
  EmbeddedLattice truncated(std::size_t s) const {
    if (s == 0 || s > z_.size()) throw ParameterError("truncation dimension out of range");
    return {n_max_, std::vector<std::uint64_t>(z_.begin(), z_.begin() + static_cast<std::ptrdiff_t>(s))};
  }

 private:
  std::size_t n_max_;
  std::vector<std::uint64_t> z_;
};

inline std::size_t subsample_stride(std::size_t n_max, std::size_t n) {
  if (n == 0 || n > n_max || n_max % n != 0) throw InvalidDivisor(n_max, n);
  return n_max / n;
}

/// t_k = (k z mod N) / N for k = 0..N-1.
inline PointSet generate_points(const EmbeddedLattice& lattice, std::size_t n) {
  subsample_stride(lattice.n_max(), n);
  const auto z = lattice.z();
  PointSet points(n, z.size());
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto row = points[k];
    for (std::size_t j = 0; j < z.size(); ++j)
      row[j] = static_cast<double>((k * (z[j] % n)) % n) * inv;
  }
  return points;
}

inline std::uint64_t euler_totient(std::uint64_t n) {
  std::uint64_t result = n;
  for (std::uint64_t p = 2; p * p <= n; ++p) {
    if (n % p != 0) continue;
    while (n % p == 0) n /= p;
    result -= result / p;
  }
  if (n > 1) result -= result / n;
  return result;
}

/// Worst-case error criterion E^2 of a candidate component given the
/// running product over earlier dimensions. omega_table[i] = omega(alpha, i/N).
inline double cbc_criterion(std::span<const double> running_product, std::span<const double> omega_table,
                            double gamma, std::uint64_t candidate) {
  const std::size_t n = running_product.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    sum += running_product[k] * (1.0 + gamma * omega_table[(k * candidate) % n]);
  return -1.0 + sum / static_cast<double>(n);
}

inline constexpr double kCbcTieTolerance = 1e-12;

/// Greedy component-by-component search: z_1 = 1, then each z_j is the odd
/// candidate minimising the Korobov worst-case error with product weights.
/// Ties go to the smallest candidate. Cost O(s N_max^2).
inline EmbeddedLattice cbc_construct(std::size_t n_max, std::size_t s, std::span<const double> weights,
                                     int alpha) {
  if (n_max < 4 || !std::has_single_bit(n_max)) throw ParameterError("CBC: N_max must be a power of two >= 4");
  if (s == 0 || weights.size() < s) throw ParameterError("CBC: need one weight per dimension");
  if (alpha < 1 || alpha > 3) throw ParameterError("CBC: alpha must be 1, 2 or 3");
  for (std::size_t j = 0; j < s; ++j)
    if (!(weights[j] > 0.0)) throw ParameterError("CBC: weights must be positive");

  std::vector<double> omega_table(n_max);
  for (std::size_t i = 0; i < n_max; ++i)
    omega_table[i] = omega(alpha, static_cast<double>(i) / static_cast<double>(n_max));

  std::vector<std::uint64_t> z{1};
  std::vector<double> product(n_max);
  for (std::size_t k = 0; k < n_max; ++k) product[k] = 1.0 + weights[0] * omega_table[k];

  const std::size_t n_candidates = n_max / 2;
  std::vector<double> errors(n_candidates);
  for (std::size_t j = 1; j < s; ++j) {
    parallel_for(n_candidates, [&](std::size_t c) {
      errors[c] = cbc_criterion(product, omega_table, weights[j], 2 * c + 1);
    });
    // Candidates related by symmetry tie exactly in real arithmetic but not
    // after rounding; a relative margin keeps the smallest of them.
    std::size_t best = 0;
    for (std::size_t c = 1; c < n_candidates; ++c)
      if (errors[c] < errors[best] - kCbcTieTolerance * std::abs(errors[best])) best = c;
    const std::uint64_t zj = 2 * best + 1;
    z.push_back(zj);
    for (std::size_t k = 0; k < n_max; ++k)
      product[k] *= 1.0 + weights[j] * omega_table[(k * zj) % n_max];
  }
  return {n_max, std::move(z)};
}

/// Componentwise (t + shift) mod 1.
inline PointSet shift_points(const PointSet& points, std::span<const double> shift) {
  if (shift.size() != points.dims()) throw ParameterError("shift dimension does not match point set");
  PointSet out = points;
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto row = out[k];
    for (std::size_t j = 0; j < row.size(); ++j) {
      double v = row[j] + shift[j];
      v -= std::floor(v);
      row[j] = v >= 1.0 ? 0.0 : v;
    }
  }
  return out;
}

// Generating-vector text file: N_max, s, then one z_j per line.

inline EmbeddedLattice read_generating_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open generating vector file " + path);
  std::size_t n_max = 0;
  std::size_t s = 0;
  if (!(in >> n_max >> s)) throw ParameterError("malformed generating vector header in " + path);
  std::vector<std::uint64_t> z(s);
  for (auto& zj : z)
    if (!(in >> zj)) throw ParameterError("generating vector file " + path + " has fewer than s entries");
  return {n_max, std::move(z)};
}

inline void write_generating_vector(const EmbeddedLattice& lattice, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParameterError("cannot write " + path);
  out << lattice.n_max() << '\n' << lattice.dims() << '\n';
  for (auto zj : lattice.z()) out << zj << '\n';
}

}  // namespace mlkpde
