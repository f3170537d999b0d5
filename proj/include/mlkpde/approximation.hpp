#pragma once

// Single-level lattice kernel interpolants and the multilevel kernel
// approximation
//   I_L^ML u = sum_{l=0}^{L} I_{N_l} (u_l - u_{l-1}),  u_{-1} = 0,
// built on one embedded lattice and a nested mesh hierarchy.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mlkpde/errors.hpp"
#include "mlkpde/fem2d.hpp"
#include "mlkpde/fft.hpp"
#include "mlkpde/kernel.hpp"
#include "mlkpde/lattice.hpp"
#include "mlkpde/matrix.hpp"
#include "mlkpde/parallel.hpp"

namespace mlkpde {

inline double thread_cpu_seconds() {
  timespec ts{};
  clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) + 1e-9 * static_cast<double>(ts.tv_nsec);
}

/// CPU seconds per construction stage.
struct StageCosts {
  double kernel_column = 0.0;
  double coefficient_eval = 0.0;
  double fe_solve = 0.0;
  double fft_solve = 0.0;

  double total() const { return kernel_column + coefficient_eval + fe_solve + fft_solve; }
  StageCosts& operator+=(const StageCosts& o) {
    kernel_column += o.kernel_column;
    coefficient_eval += o.coefficient_eval;
    fe_solve += o.fe_solve;
    fft_solve += o.fft_solve;
    return *this;
  }
};

/// Rows k * stride (k < count) of a point set.
inline PointSet subsample_rows(const PointSet& points, std::size_t stride, std::size_t count) {
  PointSet out(count, points.dims());
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = points[k * stride];
    std::copy(src.begin(), src.end(), out[k].begin());
  }
  return out;
}

inline RowMatrix subsample_rows(const RowMatrix& m, std::size_t stride, std::size_t count) {
  RowMatrix out(count, m.cols());
  for (std::size_t k = 0; k < count; ++k) {
    const auto src = m.row(k * stride);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

/// FE nodal values at each point (rows = points, columns = interior nodes).
/// Optionally accumulates per-stage CPU cost.
inline RowMatrix solve_on_points(const Assembler& assembler, const PointSet& points, StageCosts* costs = nullptr,
                                 std::vector<double>* per_point_seconds = nullptr) {
  const std::size_t n = points.size();
  RowMatrix values(n, assembler.mesh().interior_count());
  std::vector<double> coeff_time(n, 0.0), solve_time(n, 0.0);
  parallel_for(n, [&](std::size_t k) {
    const double t0 = thread_cpu_seconds();
    const auto psi = assembler.centroid_coefficients(points[k]);
    const double t1 = thread_cpu_seconds();
    const auto sys = assembler.assemble_with(psi);
    const auto sol = solve_fe(assembler.mesh(), sys);
    std::copy(sol.coeffs.begin(), sol.coeffs.end(), values.row(k).begin());
    const double t2 = thread_cpu_seconds();
    coeff_time[k] = t1 - t0;
    solve_time[k] = t2 - t1;
  });
  if (costs) {
    for (std::size_t k = 0; k < n; ++k) {
      costs->coefficient_eval += coeff_time[k];
      costs->fe_solve += solve_time[k];
    }
  }
  if (per_point_seconds) {
    per_point_seconds->resize(n);
    for (std::size_t k = 0; k < n; ++k) (*per_point_seconds)[k] = coeff_time[k] + solve_time[k];
  }
  return values;
}

/// Every row of a level-m nodal matrix re-expressed on level m + 1.
inline RowMatrix prolongate_rows(const RowMatrix& values, const MeshLevel& coarse, const MeshLevel& fine) {
  RowMatrix out(values.rows(), fine.interior_count());
  for (std::size_t k = 0; k < values.rows(); ++k) {
    const auto src = values.row(k);
    const FESolution c(coarse, std::vector<double>(src.begin(), src.end()));
    const auto f = prolongate(c, fine);
    std::copy(f.coeffs.begin(), f.coeffs.end(), out.row(k).begin());
  }
  return out;
}

struct SingleLevelInterpolant {
  PointSet points;
  KernelSpec kernel;
  MeshLevel mesh;
  CirculantOperator op;
  RowMatrix coeffs;  // N x M
  StageCosts costs;
};

/// Steps: kernel column, FE solves at the N lattice points, circulant solve.
inline SingleLevelInterpolant build_single_level(const EmbeddedLattice& lattice, std::size_t n,
                                                 const KernelSpec& kernel, const MeshLevel& mesh,
                                                 const CoefficientModel& model) {
  StageCosts costs;
  auto points = generate_points(lattice, n);
  double t0 = cpu_seconds();
  auto op = kernel_first_column(kernel, points);
  costs.kernel_column = cpu_seconds() - t0;
  const Assembler assembler(mesh, model);
  const auto values = solve_on_points(assembler, points, &costs);
  t0 = cpu_seconds();
  auto coeffs = circulant_solve(op, values);
  costs.fft_solve = cpu_seconds() - t0;
  return {std::move(points), kernel, mesh, std::move(op), std::move(coeffs), costs};
}

/// Nodal values of sum_k A[k, :] K(t_k, y).
inline std::vector<double> evaluate_nodal(const RowMatrix& coeffs, const PointSet& points, const KernelSpec& kernel,
                                          std::span<const double> y) {
  std::vector<double> out(coeffs.cols(), 0.0);
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double kv = kernel_eval(kernel, points[k], y);
    const auto row = coeffs.row(k);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += kv * row[i];
  }
  return out;
}

/// Nodal values of the interpolant at y + t_k for every k, via one FFT
/// correlation per column: value_k = sum_j K(t_j, y) A[j + k].
inline RowMatrix evaluate_on_shifted_lattice(const RowMatrix& coeffs, const PointSet& points,
                                             const KernelSpec& kernel, std::span<const double> shift) {
  const std::size_t n = points.size();
  const auto c = kernel_vector(kernel, points, shift);
  const auto c_hat = detail::rfft(c);
  auto a_hat = detail::rfft_columns(coeffs.data(), n, coeffs.cols());
  for (std::size_t p = 0; p <= n / 2; ++p) {
    const auto w = std::conj(c_hat.at(p, 0));
    for (std::size_t col = 0; col < coeffs.cols(); ++col) a_hat.at(p, col) *= w;
  }
  return detail::irfft_columns(std::move(a_hat));
}

inline void check_domain(double x1, double x2) {
  if (!(x1 >= 0.0 && x1 <= 1.0 && x2 >= 0.0 && x2 <= 1.0)) throw DomainError("x* outside the unit square");
}

inline double evaluate(const SingleLevelInterpolant& sl, double x1, double x2, std::span<const double> y) {
  check_domain(x1, x2);
  const auto st = basis_at(sl.mesh, x1, x2);
  double v = 0.0;
  for (std::size_t k = 0; k < sl.points.size(); ++k) {
    double a = 0.0;
    for (std::size_t q = 0; q < st.count; ++q) a += st.weight[q] * sl.coeffs(k, st.index[q]);
    if (a != 0.0) v += a * kernel_eval(sl.kernel, sl.points[k], y);
  }
  return v;
}

struct MLLevel {
  std::size_t n;  // N_l
  int mesh_level;  // m_l
  RowMatrix coeffs;  // N_l x M_l
};

struct MLApproximation {
  std::vector<std::uint64_t> z;
  KernelSpec kernel;
  PointSet points;  // the N_0 level-0 points
  std::vector<MLLevel> levels;

  std::size_t max_level() const { return levels.size() - 1; }
  std::size_t stride(std::size_t l) const { return levels.front().n / levels[l].n; }
};

struct LevelSpec {
  std::size_t n;
  int mesh_level;
};

struct MLBuildReport {
  StageCosts costs;
  std::vector<std::size_t> fe_solves;  // per level
  std::vector<double> interpolation_residual;  // max |K A - rhs| / max |rhs| per level
};

inline void validate_levels(std::span<const LevelSpec> levels, std::size_t n_max) {
  if (levels.empty()) throw ParameterError("multilevel build needs at least one level");
  subsample_stride(n_max, levels[0].n);
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (levels[l].mesh_level != levels[l - 1].mesh_level + 1)
      throw ParameterError("mesh levels must ascend by one per level");
    if (levels[l].n > levels[l - 1].n || levels[l - 1].n % levels[l].n != 0)
      throw InvalidDivisor(levels[l - 1].n, levels[l].n);
  }
  MeshLevel(levels.back().mesh_level);
  MeshLevel(levels.front().mesh_level);
}

inline double relative_residual(const CirculantOperator& op, const RowMatrix& coeffs, const RowMatrix& rhs) {
  const auto applied = circulant_apply(op, coeffs);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < rhs.data().size(); ++i) {
    num = std::max(num, std::abs(applied.data()[i] - rhs.data()[i]));
    den = std::max(den, std::abs(rhs.data()[i]));
  }
  return den == 0.0 ? num : num / den;
}

/// Multilevel construction. Level l solves the FE problem on mesh m_l at its
/// N_l points only; the coarse part of the difference comes from stored
/// level l-1 rows at stride N_{l-1}/N_l, prolongated to mesh m_l.
inline MLApproximation build_multilevel(const EmbeddedLattice& lattice, std::span<const LevelSpec> levels,
                                        const KernelSpec& kernel, const CoefficientModel& model,
                                        MLBuildReport* report = nullptr, bool check_residuals = false) {
  validate_levels(levels, lattice.n_max());
  MLBuildReport rep;
  const std::size_t n0 = levels[0].n;
  auto points0 = generate_points(lattice, n0);
  double t0 = cpu_seconds();
  const auto op0 = kernel_first_column(kernel, points0);
  rep.costs.kernel_column = cpu_seconds() - t0;

  MLApproximation ml{std::vector<std::uint64_t>(lattice.z().begin(), lattice.z().end()), kernel, points0, {}};
  RowMatrix previous;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const std::size_t n = levels[l].n;
    const std::size_t stride = n0 / n;
    const MeshLevel mesh(levels[l].mesh_level);
    const auto op = l == 0 ? op0 : op0.subsampled(stride);
    const auto pts = subsample_rows(points0, stride, n);
    RowMatrix values = solve_on_points(Assembler(mesh, model), pts, &rep.costs);
    rep.fe_solves.push_back(n);

    t0 = cpu_seconds();
    RowMatrix rhs = values;
    if (l > 0) {
      const auto coarse_rows = subsample_rows(previous, levels[l - 1].n / n, n);
      const auto coarse = prolongate_rows(coarse_rows, MeshLevel(levels[l - 1].mesh_level), mesh);
      for (std::size_t i = 0; i < rhs.data().size(); ++i) rhs.data()[i] -= coarse.data()[i];
    }
    auto coeffs = circulant_solve(op, rhs);
    rep.costs.fft_solve += cpu_seconds() - t0;
    if (check_residuals) rep.interpolation_residual.push_back(relative_residual(op, coeffs, rhs));
    ml.levels.push_back({n, levels[l].mesh_level, std::move(coeffs)});
    previous = std::move(values);
  }
  if (report) *report = std::move(rep);
  return ml;
}

inline MLApproximation to_multilevel(const SingleLevelInterpolant& sl, std::span<const std::uint64_t> z) {
  return {std::vector<std::uint64_t>(z.begin(), z.end()), sl.kernel, sl.points,
          {MLLevel{sl.points.size(), sl.mesh.level(), sl.coeffs}}};
}

/// a(x*)^T kappa(y*): per level, combine the <= 3 columns whose basis
/// functions cover x*, scatter to the N_0 points by stride, then one kernel
/// evaluation per level-0 point.
inline double evaluate(const MLApproximation& ml, double x1, double x2, std::span<const double> y) {
  check_domain(x1, x2);
  const std::size_t n0 = ml.points.size();
  std::vector<double> a(n0, 0.0);
  for (std::size_t l = 0; l < ml.levels.size(); ++l) {
    const auto& lev = ml.levels[l];
    const auto st = basis_at(MeshLevel(lev.mesh_level), x1, x2);
    const std::size_t stride = ml.stride(l);
    for (std::size_t k = 0; k < lev.n; ++k) {
      double v = 0.0;
      for (std::size_t q = 0; q < st.count; ++q) v += st.weight[q] * lev.coeffs(k, st.index[q]);
      a[k * stride] += v;
    }
  }
  double out = 0.0;
  for (std::size_t k = 0; k < n0; ++k)
    if (a[k] != 0.0) out += a[k] * kernel_eval(ml.kernel, ml.points[k], y);
  return out;
}

/// Whole nodal field of the approximation at y on the finest mesh.
inline FESolution evaluate_field(const MLApproximation& ml, std::span<const double> y) {
  const int finest = ml.levels.back().mesh_level;
  FESolution total(MeshLevel{finest});
  for (std::size_t l = 0; l < ml.levels.size(); ++l) {
    const auto& lev = ml.levels[l];
    const auto pts = subsample_rows(ml.points, ml.stride(l), lev.n);
    auto part = prolongate_to(FESolution(MeshLevel(lev.mesh_level), evaluate_nodal(lev.coeffs, pts, ml.kernel, y)),
                              finest);
    for (std::size_t i = 0; i < part.coeffs.size(); ++i) total.coeffs[i] += part.coeffs[i];
  }
  return total;
}

/// Nodal fields (finest mesh) of the approximation at shift + t_{0,k} for
/// all k < N_0. Level l splits the N_0 points into N_0/N_l cosets
/// t_{0,j} + t_{l,i}, each handled by one shifted-lattice FFT evaluation.
inline RowMatrix evaluate_on_shifted_points(const MLApproximation& ml, std::span<const double> shift) {
  const std::size_t n0 = ml.points.size();
  const int finest = ml.levels.back().mesh_level;
  const MeshLevel fine(finest);
  RowMatrix out(n0, fine.interior_count());
  std::vector<double> coset_shift(shift.size());
  for (std::size_t l = 0; l < ml.levels.size(); ++l) {
    const auto& lev = ml.levels[l];
    const std::size_t stride = ml.stride(l);
    const auto pts = subsample_rows(ml.points, stride, lev.n);
    const MeshLevel mesh(lev.mesh_level);
    for (std::size_t j = 0; j < stride; ++j) {
      const auto tj = ml.points[j];
      for (std::size_t d = 0; d < shift.size(); ++d) {
        const double v = shift[d] + tj[d];
        coset_shift[d] = v - std::floor(v);
      }
      const auto vals = evaluate_on_shifted_lattice(lev.coeffs, pts, ml.kernel, coset_shift);
      for (std::size_t i = 0; i < lev.n; ++i) {
        const auto src = vals.row(i);
        auto field = prolongate_to(FESolution(mesh, std::vector<double>(src.begin(), src.end())), finest);
        auto dst = out.row(j + i * stride);
        for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += field.coeffs[q];
      }
    }
  }
  return out;
}

struct LevelPlan {
  double epsilon;
  double h0;
  double beta;
  double mu;
  double d;
  std::size_t max_level;  // L
  double n0_hat;
  std::vector<double> n_hat;  // continuous N_l
  std::vector<std::size_t> n;  // integer N_l
};

/// Level count and per-level point counts minimising the multilevel cost
/// subject to sum_l N_l^{-mu} h_l^beta <= epsilon / 2, with h_l = h0 2^{-l}.
/// With snap_to_divisors each N_l is rounded up to a power of two, so all
/// N_l divide N_0 and the embedded lattice applies.
inline LevelPlan plan_levels(double epsilon, double h0, double beta, double mu, double d,
                             bool snap_to_divisors = true) {
  if (!(mu > 0.0) || !(beta > 0.0)) throw ParameterError("plan_levels: mu and beta must be positive");
  if (!(h0 > 0.0) || !(d > 0.0)) throw ParameterError("plan_levels: h0 and d must be positive");
  const double h0b = std::pow(h0, beta);
  if (!(epsilon > 0.0 && epsilon < 1.0 && epsilon < 2.0 * h0b))
    throw ParameterError("plan_levels: epsilon must satisfy 0 < epsilon < min(1, 2 h0^beta)");
  LevelPlan plan{epsilon, h0, beta, mu, d, 0, 0.0, {}, {}};
  const double raw = std::log2(2.0 * h0b / epsilon) / beta;
  // Guard against log2 rounding just above an integer.
  const double rounded = std::round(raw);
  plan.max_level = static_cast<std::size_t>(std::abs(raw - rounded) < 1e-12 ? rounded : std::ceil(raw));
  if (plan.max_level < 1) plan.max_level = 1;
  const double exponent = (d * mu - beta) / (1.0 + mu);
  double series = 0.0;
  for (std::size_t l = 0; l <= plan.max_level; ++l) series += std::exp2(exponent * static_cast<double>(l));
  plan.n0_hat = std::pow(2.0 / epsilon * h0b * series, 1.0 / mu);
  for (std::size_t l = 0; l <= plan.max_level; ++l) {
    const double nh = plan.n0_hat * std::exp2(-(d + beta) * static_cast<double>(l) / (1.0 + mu));
    plan.n_hat.push_back(nh);
    auto n = static_cast<std::size_t>(std::ceil(nh - 1e-9 * nh));
    if (n < 1) n = 1;
    if (snap_to_divisors) n = std::bit_ceil(n);
    plan.n.push_back(n);
  }
  return plan;
}

}  // namespace mlkpde
