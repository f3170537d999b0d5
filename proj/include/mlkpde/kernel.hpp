#pragma once

// Korobov reproducing kernel with product weights, its circulant matrices
// on rank-1 lattices, and the serendipitous weight recipe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "mlkpde/errors.hpp"
#include "mlkpde/fft.hpp"
#include "mlkpde/lattice.hpp"
#include "mlkpde/matrix.hpp"
#include "mlkpde/special_functions.hpp"

namespace mlkpde {

class KernelSpec {
 public:
  KernelSpec(int alpha, std::vector<double> gamma) : alpha_(alpha), gamma_(std::move(gamma)) {
    if (alpha_ < 1 || alpha_ > 3)
      throw ParameterError("kernel smoothness alpha must be 1, 2 or 3 (FFT eigenvalues lose accuracy beyond)");
    if (gamma_.empty()) throw ParameterError("kernel needs at least one weight");
    for (double g : gamma_)
      if (!(g > 0.0) || !std::isfinite(g)) throw ParameterError("kernel weights must be positive and finite");
  }

  int alpha() const noexcept { return alpha_; }
  std::size_t dims() const noexcept { return gamma_.size(); }
  std::span<const double> gamma() const noexcept { return gamma_; }

 private:
  int alpha_;
  std::vector<double> gamma_;
};

namespace detail {

/// Wrapped distance |a - b| mod 1, folded into [0, 1/2] (B_{2 alpha} is symmetric about 1/2).
inline double periodic_distance(double a, double b) {
  double d = a - b;
  d -= std::floor(d);
  return d > 0.5 ? 1.0 - d : d;
}

}  // namespace detail

/// prod_j [1 + gamma_j omega_alpha(|y_j - y2_j|)], arguments taken mod 1.
inline double kernel_eval(const KernelSpec& spec, std::span<const double> y, std::span<const double> y2) {
  if (y.size() != spec.dims() || y2.size() != spec.dims())
    throw ParameterError("kernel_eval: argument dimension does not match kernel");
  const auto gamma = spec.gamma();
  double value = 1.0;
  for (std::size_t j = 0; j < gamma.size(); ++j)
    value *= 1.0 + gamma[j] * omega(spec.alpha(), detail::periodic_distance(y[j], y2[j]));
  return value;
}

/// Symmetric circulant matrix given by its first column, with its DFT eigenvalues.
class CirculantOperator {
 public:
  explicit CirculantOperator(std::vector<double> first_col) : first_col_(std::move(first_col)) {
    if (first_col_.empty()) throw ParameterError("circulant operator needs at least one entry");
    const std::size_t n = first_col_.size();
    const auto spectrum = detail::rfft(first_col_);
    eigenvalues_.resize(n);
    for (std::size_t j = 0; j <= n / 2; ++j) {
      eigenvalues_[j] = spectrum.at(j, 0).real();
      eigenvalues_[(n - j) % n] = eigenvalues_[j];
    }
  }

  std::size_t size() const noexcept { return first_col_.size(); }
  std::span<const double> first_col() const noexcept { return first_col_; }
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }

  /// Every stride-th entry: the operator of the nested sub-lattice.
  CirculantOperator subsampled(std::size_t stride) const {
    subsample_stride(size(), size() / stride);
    std::vector<double> col;
    for (std::size_t k = 0; k < size(); k += stride) col.push_back(first_col_[k]);
    return CirculantOperator(std::move(col));
  }

 private:
  std::vector<double> first_col_;
  std::vector<double> eigenvalues_;
};

/// First column [K(t_k, 0)]_k of the kernel matrix on a rank-1 lattice.
/// Only k <= N/2 is evaluated; the rest follows from t_{N-k} = 1 - t_k.
inline CirculantOperator kernel_first_column(const KernelSpec& spec, const PointSet& points) {
  const std::size_t n = points.size();
  if (n == 0) throw ParameterError("kernel_first_column: empty point set");
  const std::vector<double> origin(points.dims(), 0.0);
  std::vector<double> col(n);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    col[k] = kernel_eval(spec, points[k], origin);
    col[(n - k) % n] = col[k];
  }
  return CirculantOperator(std::move(col));
}

/// kappa(y) = [K(t_k, y)]_k.
inline std::vector<double> kernel_vector(const KernelSpec& spec, const PointSet& points, std::span<const double> y) {
  std::vector<double> out(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) out[k] = kernel_eval(spec, points[k], y);
  return out;
}

inline constexpr double kEigenvalueCutoff = 1e-12;

/// Solves K A = rhs for every column of rhs by FFT diagonalisation.
inline RowMatrix circulant_solve(const CirculantOperator& op, const RowMatrix& rhs) {
  const std::size_t n = op.size();
  if (rhs.rows() != n) throw ParameterError("circulant_solve: rhs row count does not match operator size");
  const auto eig = op.eigenvalues();
  double max_abs = 0.0;
  for (double e : eig) max_abs = std::max(max_abs, std::abs(e));
  for (std::size_t j = 0; j < n; ++j)
    if (!(std::abs(eig[j]) > kEigenvalueCutoff * max_abs)) throw IllConditionedKernel(j, eig[j], max_abs);

  auto spectrum = detail::rfft_columns(rhs.data(), n, rhs.cols());
  for (std::size_t j = 0; j <= n / 2; ++j) {
    const double inv = 1.0 / eig[j];
    for (std::size_t c = 0; c < rhs.cols(); ++c) spectrum.at(j, c) *= inv;
  }
  return detail::irfft_columns(std::move(spectrum));
}

/// Dense product K A, used to check interpolation residuals.
inline RowMatrix circulant_apply(const CirculantOperator& op, const RowMatrix& a) {
  const std::size_t n = op.size();
  if (a.rows() != n) throw ParameterError("circulant_apply: row count does not match operator size");
  const auto col = op.first_col();
  RowMatrix out(n, a.cols());
  for (std::size_t k = 0; k < n; ++k) {
    auto dst = out.row(k);
    for (std::size_t kp = 0; kp < n; ++kp) {
      const double c = col[(k + n - kp) % n];
      const auto src = a.row(kp);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += c * src[i];
    }
  }
  return out;
}

struct WeightRecipe {
  double lambda = 0.6;
  std::vector<double> bbar;
  int alpha = 1;
};

/// gamma_j = [sum_{m=1}^{alpha} bbar_j^m S(alpha, m) / sqrt(2 e^{1/e} zeta(2 alpha lambda))]^{2/(1+lambda)}.
inline std::vector<double> serendipitous_weights(const WeightRecipe& recipe, std::size_t s) {
  const int alpha = recipe.alpha;
  if (alpha < 1 || alpha > 3) throw ParameterError("weights: alpha must be 1, 2 or 3");
  const double lo = 1.0 / (2.0 * alpha);
  if (!(recipe.lambda > lo && recipe.lambda <= 1.0))
    throw ParameterError("weights: lambda must lie in (1/(2 alpha), 1]");
  if (recipe.bbar.size() < s) throw ParameterError("weights: need s values of bbar");
  const double denom = std::sqrt(2.0 * std::exp(1.0 / std::numbers::e) * riemann_zeta(2.0 * alpha * recipe.lambda));
  const double exponent = 2.0 / (1.0 + recipe.lambda);
  std::vector<double> gamma(s);
  for (std::size_t j = 0; j < s; ++j) {
    const double b = recipe.bbar[j];
    if (!(b > 0.0)) throw ParameterError("weights: bbar must be positive");
    double bracket = 0.0;
    double power = 1.0;
    for (int m = 1; m <= alpha; ++m) {
      power *= b;
      bracket += power * static_cast<double>(stirling2(alpha, m)) / denom;
    }
    gamma[j] = std::pow(bracket, exponent);
  }
  return gamma;
}

}  // namespace mlkpde
