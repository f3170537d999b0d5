#pragma once

// Empirical convergence and cost studies: FE error in h, truncation error
// in s, single-level interpolation error in N, level-difference
// interpolation error in (l, N), and single- vs multilevel cost.
// Interpolation errors use the shifted-lattice estimator
//   sqrt( 1/(R N) sum_r sum_k || u(., y_r + t_k) - I u(., y_r + t_k) ||^2_{L2(D)} )
// with Sobol shifts y_r.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlkpde/approximation.hpp"
#include "mlkpde/coefficient.hpp"
#include "mlkpde/errors.hpp"
#include "mlkpde/fem2d.hpp"
#include "mlkpde/kernel.hpp"
#include "mlkpde/lattice.hpp"
#include "mlkpde/sobol_table.hpp"

namespace mlkpde {

inline constexpr std::size_t kSobolMaxDims = 64;

/// Points 1..R of the unscrambled Sobol sequence in natural (non-Gray) order;
/// the all-zero point 0 is skipped.
inline PointSet sobol_shifts(std::size_t count, std::size_t s) {
  if (count == 0) throw ParameterError("sobol_shifts: need at least one shift");
  if (s == 0 || s > kSobolMaxDims) throw ParameterError("sobol_shifts: dimension must lie in [1, 64]");
  constexpr int kBits = 32;
  std::vector<std::array<std::uint32_t, kBits>> v(s);
  for (int b = 0; b < kBits; ++b) v[0][b] = std::uint32_t{1} << (31 - b);
  for (std::size_t d = 1; d < s; ++d) {
    const auto& poly = detail::kSobolTable[d - 1];
    const int deg = static_cast<int>(poly.degree);
    for (int b = 0; b < kBits; ++b) {
      if (b < deg) {
        v[d][b] = poly.m[b] << (31 - b);
        continue;
      }
      std::uint32_t x = v[d][b - deg] ^ (v[d][b - deg] >> deg);
      for (int k = 1; k < deg; ++k)
        if ((poly.coeffs >> (deg - 1 - k)) & 1u) x ^= v[d][b - k];
      v[d][b] = x;
    }
  }
  PointSet out(count, s);
  for (std::size_t r = 0; r < count; ++r) {
    const std::uint64_t index = r + 1;
    for (std::size_t d = 0; d < s; ++d) {
      std::uint32_t x = 0;
      for (int b = 0; b < kBits; ++b)
        if ((index >> b) & 1u) x ^= v[d][b];
      out[r][d] = static_cast<double>(x) / 4294967296.0;
    }
  }
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through (log2 x, log2 y).
inline LineFit fit_loglog(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw ParameterError("fit: need at least 3 (x, y) pairs");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit: values must be positive");
    lx.push_back(std::log2(x[i]));
    ly.push_back(std::log2(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw DomainError("fit: x values are all equal");
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

struct RateFit {
  double rate = 0.0;  // -slope
  double intercept = 0.0;
};

inline RateFit fit_rate(std::span<const double> x, std::span<const double> err) {
  const auto line = fit_loglog(x, err);
  return {-line.slope, line.intercept};
}

struct StudyRow {
  std::string param;
  double value = 0.0;
  double error = 0.0;
  double cpu_seconds = 0.0;
};

struct StudyResult {
  std::string study;
  std::string preset;
  std::vector<StudyRow> rows;
  std::map<std::string, double> fits;
};

/// Preset model, embedded lattice and kernel shared by all studies.
struct Problem {
  std::string name;
  CoefficientModel model;
  EmbeddedLattice lattice;
  KernelSpec kernel;
};

/// Serendipitous weights from the model's bbar sequence and a CBC lattice
/// for them, or the supplied generating vector.
inline Problem make_problem(const std::string& name, const CoefficientModel& model, std::size_t n_max, int alpha,
                            double lambda, std::optional<EmbeddedLattice> lattice = std::nullopt) {
  auto gamma = serendipitous_weights({lambda, bbar_sequence(model), alpha}, model.dims());
  if (!lattice) lattice = cbc_construct(n_max, model.dims(), gamma, alpha);
  if (lattice->dims() < model.dims()) throw ParameterError("generating vector has fewer components than s");
  if (lattice->dims() > model.dims()) lattice = lattice->truncated(model.dims());
  return {name, model, std::move(*lattice), KernelSpec(alpha, std::move(gamma))};
}

namespace detail {

inline double row_l2_diff_sq(const MeshLevel& mesh, std::span<const double> a, std::span<const double> b,
                             std::vector<double>& scratch) {
  scratch.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) scratch[i] = a[i] - b[i];
  return l2_norm_squared(mesh, scratch);
}

/// Row k of `values` (on `coarse`) prolongated to `target`.
inline std::vector<double> row_on_level(const RowMatrix& values, std::size_t k, const MeshLevel& coarse,
                                        int target) {
  const auto src = values.row(k);
  return prolongate_to(FESolution(coarse, std::vector<double>(src.begin(), src.end())), target).coeffs;
}

inline std::vector<PointSet> shifted_point_sets(const PointSet& points, const PointSet& shifts) {
  std::vector<PointSet> out;
  for (std::size_t r = 0; r < shifts.size(); ++r) out.push_back(shift_points(points, shifts[r]));
  return out;
}

inline std::vector<std::size_t> ensure_divisors(std::span<const std::size_t> n_list, std::size_t n_max) {
  std::vector<std::size_t> out(n_list.begin(), n_list.end());
  for (auto n : out) subsample_stride(n_max, n);
  return out;
}

}  // namespace detail

/// RMS over N lattice points of || u_{h_ref} - u_h ||_{L2(D)} for each mesh level.
inline StudyResult fe_error_study(const Problem& problem, std::span<const int> m_list, int m_ref, std::size_t n_quad) {
  if (m_list.empty()) throw ParameterError("fe study: empty mesh list");
  if (m_ref <= *std::max_element(m_list.begin(), m_list.end()))
    throw ParameterError("fe study: reference level must exceed every studied level");
  const auto points = generate_points(problem.lattice, n_quad);
  const MeshLevel ref_mesh(m_ref);
  const auto reference = solve_on_points(Assembler(ref_mesh, problem.model), points);

  StudyResult result{"fe", problem.name, {}, {}};
  std::vector<double> inv_h, errs, costs;
  for (int m : m_list) {
    const MeshLevel mesh(m);
    StageCosts cost;
    const auto values = solve_on_points(Assembler(mesh, problem.model), points, &cost);
    double sum = 0.0;
    std::vector<double> scratch;
    for (std::size_t k = 0; k < n_quad; ++k) {
      const auto fine = detail::row_on_level(values, k, mesh, m_ref);
      sum += detail::row_l2_diff_sq(ref_mesh, fine, reference.row(k), scratch);
    }
    const double err = std::sqrt(sum / static_cast<double>(n_quad));
    const double per_solve = (cost.coefficient_eval + cost.fe_solve) / static_cast<double>(n_quad);
    result.rows.push_back({"h", mesh.width(), err, per_solve});
    inv_h.push_back(1.0 / mesh.width());
    errs.push_back(err);
    costs.push_back(per_solve);
  }
  if (result.rows.size() >= 3) {
    const auto rate = fit_rate(inv_h, errs);
    result.fits["beta"] = rate.rate;
    result.fits["beta_intercept"] = rate.intercept;
    if (std::all_of(costs.begin(), costs.end(), [](double c) { return c > 0.0; }))
      result.fits["tau"] = fit_loglog(inv_h, costs).slope;
  }
  return result;
}

/// RMS over N lattice points of || u^{s_ref}_h - u^s_h ||_{L2(D)}.
inline StudyResult truncation_study(const Problem& problem, std::span<const std::size_t> s_list, int m,
                                    std::size_t n_quad) {
  const std::size_t s_ref = problem.model.dims();
  if (s_list.empty()) throw ParameterError("truncation study: empty dimension list");
  if (s_ref <= *std::max_element(s_list.begin(), s_list.end()))
    throw ParameterError("truncation study: reference dimension must exceed every studied dimension");
  const auto points = generate_points(problem.lattice, n_quad);
  const MeshLevel mesh(m);
  const auto reference = solve_on_points(Assembler(mesh, problem.model), points);

  StudyResult result{"truncation", problem.name, {}, {}};
  std::vector<double> xs, errs;
  for (auto s : s_list) {
    StageCosts cost;
    const auto values = solve_on_points(Assembler(mesh, truncate(problem.model, s)), points, &cost);
    double sum = 0.0;
    std::vector<double> scratch;
    for (std::size_t k = 0; k < n_quad; ++k) sum += detail::row_l2_diff_sq(mesh, values.row(k), reference.row(k), scratch);
    const double err = std::sqrt(sum / static_cast<double>(n_quad));
    result.rows.push_back({"s", static_cast<double>(s), err, cost.coefficient_eval + cost.fe_solve});
    xs.push_back(static_cast<double>(s));
    errs.push_back(err);
  }
  if (result.rows.size() >= 3) {
    const auto rate = fit_rate(xs, errs);
    result.fits["kappa"] = rate.rate;
    result.fits["kappa_intercept"] = rate.intercept;
  }
  return result;
}

namespace detail {

/// Shifted-lattice estimator for interpolating `data` (N_max x M rows on the
/// lattice) with the first N points; `shifted[r]` holds the data at
/// y_r + t_k for the full N_max lattice.
inline double interpolation_error(const Problem& problem, const PointSet& points_max, const CirculantOperator& op_max,
                                  const RowMatrix& data, const std::vector<RowMatrix>& shifted, const PointSet& shifts,
                                  const MeshLevel& mesh, std::size_t n, double* fft_seconds = nullptr) {
  const std::size_t stride = points_max.size() / n;
  const auto pts = subsample_rows(points_max, stride, n);
  const auto op = op_max.subsampled(stride);
  const double t0 = cpu_seconds();
  const auto coeffs = circulant_solve(op, subsample_rows(data, stride, n));
  if (fft_seconds) *fft_seconds = cpu_seconds() - t0;
  double sum = 0.0;
  std::vector<double> scratch;
  for (std::size_t r = 0; r < shifts.size(); ++r) {
    const auto approx = evaluate_on_shifted_lattice(coeffs, pts, problem.kernel, shifts[r]);
    for (std::size_t k = 0; k < n; ++k)
      sum += row_l2_diff_sq(mesh, approx.row(k), shifted[r].row(k * stride), scratch);
  }
  return std::sqrt(sum / static_cast<double>(shifts.size() * n));
}

}  // namespace detail

/// Single-level interpolation error for each N of n_list on mesh m_star.
inline StudyResult sl_error_study(const Problem& problem, std::span<const std::size_t> n_list, int m_star,
                                  std::size_t shifts_count) {
  if (n_list.empty()) throw ParameterError("sl study: empty N list");
  const auto ns = detail::ensure_divisors(n_list, problem.lattice.n_max());
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  const auto points = generate_points(problem.lattice, n_max);
  const auto shifts = sobol_shifts(shifts_count, problem.model.dims());
  const MeshLevel mesh(m_star);
  const Assembler assembler(mesh, problem.model);

  // Per-point costs so each N is charged for its own solves only.
  std::vector<double> solve_cost;
  const auto values = solve_on_points(assembler, points, nullptr, &solve_cost);
  std::vector<RowMatrix> shifted;
  for (const auto& pts : detail::shifted_point_sets(points, shifts)) shifted.push_back(solve_on_points(assembler, pts));

  double t0 = cpu_seconds();
  const auto op_max = kernel_first_column(problem.kernel, points);
  const double kernel_seconds = cpu_seconds() - t0;

  StudyResult result{"sl", problem.name, {}, {}};
  std::vector<double> xs, errs;
  for (auto n : ns) {
    double fft_seconds = 0.0;
    const double err =
        detail::interpolation_error(problem, points, op_max, values, shifted, shifts, mesh, n, &fft_seconds);
    const std::size_t stride = n_max / n;
    double cost = fft_seconds + kernel_seconds * static_cast<double>(n) / static_cast<double>(n_max);
    for (std::size_t k = 0; k < n; ++k) cost += solve_cost[k * stride];
    result.rows.push_back({"N", static_cast<double>(n), err, cost});
    xs.push_back(static_cast<double>(n));
    errs.push_back(err);
  }
  if (result.rows.size() >= 3) {
    const auto rate = fit_rate(xs, errs);
    result.fits["mu"] = rate.rate;
    result.fits["mu_intercept"] = rate.intercept;
  }
  return result;
}

/// Interpolation error of u_l - u_{l-1} (u_{-1} = 0) on meshes m0 + l,
/// l = 0..L, for each N.
inline StudyResult level_difference_study(const Problem& problem, int m0, std::size_t max_level,
                                          std::span<const std::size_t> n_list, std::size_t shifts_count) {
  if (n_list.empty()) throw ParameterError("level study: empty N list");
  const auto ns = detail::ensure_divisors(n_list, problem.lattice.n_max());
  const std::size_t n_max = *std::max_element(ns.begin(), ns.end());
  MeshLevel(m0 + static_cast<int>(max_level));
  const auto points = generate_points(problem.lattice, n_max);
  const auto shifts = sobol_shifts(shifts_count, problem.model.dims());
  const auto shifted_points = detail::shifted_point_sets(points, shifts);
  const auto op_max = kernel_first_column(problem.kernel, points);

  StudyResult result{"level", problem.name, {}, {}};
  RowMatrix prev_lattice;
  std::vector<RowMatrix> prev_shifted;
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  for (std::size_t l = 0; l <= max_level; ++l) {
    const MeshLevel mesh(m0 + static_cast<int>(l));
    const Assembler assembler(mesh, problem.model);
    StageCosts cost;
    RowMatrix lattice_vals = solve_on_points(assembler, points, &cost);
    std::vector<RowMatrix> shifted_vals;
    for (const auto& pts : shifted_points) shifted_vals.push_back(solve_on_points(assembler, pts));

    RowMatrix diff = lattice_vals;
    std::vector<RowMatrix> diff_shifted = shifted_vals;
    if (l > 0) {
      const MeshLevel coarse(m0 + static_cast<int>(l) - 1);
      const auto p = prolongate_rows(prev_lattice, coarse, mesh);
      for (std::size_t i = 0; i < diff.data().size(); ++i) diff.data()[i] -= p.data()[i];
      for (std::size_t r = 0; r < shifts.size(); ++r) {
        const auto ps = prolongate_rows(prev_shifted[r], coarse, mesh);
        for (std::size_t i = 0; i < ps.data().size(); ++i) diff_shifted[r].data()[i] -= ps.data()[i];
      }
    }
    std::vector<double> xs, errs;
    for (auto n : ns) {
      const double err = detail::interpolation_error(problem, points, op_max, diff, diff_shifted, shifts, mesh, n);
      const double per_point = (cost.coefficient_eval + cost.fe_solve) / static_cast<double>(n_max);
      result.rows.push_back({"l=" + std::to_string(l), static_cast<double>(n), err, per_point * static_cast<double>(n)});
      xs.push_back(static_cast<double>(n));
      errs.push_back(err);
      table[{l, n}] = err;
    }
    if (xs.size() >= 3) {
      const auto rate = fit_rate(xs, errs);
      result.fits["mu_l" + std::to_string(l)] = rate.rate;
    }
    prev_lattice = std::move(lattice_vals);
    prev_shifted = std::move(shifted_vals);
  }
  for (std::size_t l = 1; l <= max_level; ++l)
    for (auto n : ns) result.fits["decay_l" + std::to_string(l) + "_N" + std::to_string(n)] = table[{l - 1, n}] / table[{l, n}];
  if (max_level >= 1 && ns.size() >= 3) {
    double mean = 0.0;
    for (std::size_t l = 1; l <= max_level; ++l) mean += result.fits["mu_l" + std::to_string(l)];
    result.fits["mu_ml_mean"] = mean / static_cast<double>(max_level);
  }
  return result;
}

struct Pairing {
  int mesh_level;
  std::size_t n;
};

/// Desk-scale pairings following the pattern of the full-scale table, m <= 5.
inline std::vector<Pairing> default_pairings(const std::string& preset) {
  if (preset == "hard") return {{3, 64}, {4, 256}, {5, 1024}};
  return {{3, 64}, {4, 128}, {5, 512}};
}

/// Full-scale pairing table (h = 2^-3 .. 2^-8).
inline std::vector<Pairing> full_scale_pairings(const std::string& preset) {
  if (preset == "hard") return {{3, 64}, {4, 256}, {5, 1024}, {6, 4096}, {7, 16384}, {8, 65536}};
  return {{3, 64}, {4, 128}, {5, 512}, {6, 1024}, {7, 2048}, {8, 8192}};
}

/// Multilevel levels for max level L from a pairing table: level l uses the
/// mesh of entry l and the point count of entry L - l.
inline std::vector<LevelSpec> levels_from_pairings(std::span<const Pairing> pairings, std::size_t max_level) {
  if (max_level >= pairings.size()) throw ParameterError("pairing table too short for requested level count");
  std::vector<LevelSpec> out;
  for (std::size_t l = 0; l <= max_level; ++l) out.push_back({pairings[max_level - l].n, pairings[l].mesh_level});
  return out;
}

/// CPU cost against estimated error for single-level interpolants at each
/// pairing and multilevel approximations for L = 0..P-1, both measured
/// against a reference mesh m_ref with the shifted-lattice estimator.
inline StudyResult cost_comparison_study(const Problem& problem, std::span<const Pairing> pairings,
                                         std::size_t shifts_count, int m_ref) {
  if (pairings.empty()) throw ParameterError("cost study: empty pairing table");
  for (std::size_t i = 1; i < pairings.size(); ++i) {
    if (pairings[i].mesh_level != pairings[i - 1].mesh_level + 1)
      throw ParameterError("cost study: pairings must ascend in mesh level by one");
    if (pairings[i].n < pairings[i - 1].n || pairings[i].n % pairings[i - 1].n != 0)
      throw ParameterError("cost study: pairing point counts must be non-decreasing divisors");
  }
  if (m_ref <= pairings.back().mesh_level) throw ParameterError("cost study: reference level must exceed the pairings");
  std::size_t n_max = 0;
  for (const auto& p : pairings) {
    subsample_stride(problem.lattice.n_max(), p.n);
    n_max = std::max(n_max, p.n);
  }
  const MeshLevel ref_mesh(m_ref);
  const auto points = generate_points(problem.lattice, n_max);
  const auto shifts = sobol_shifts(shifts_count, problem.model.dims());
  std::vector<RowMatrix> reference;
  {
    const Assembler ref_assembler(ref_mesh, problem.model);
    for (const auto& pts : detail::shifted_point_sets(points, shifts))
      reference.push_back(solve_on_points(ref_assembler, pts));
  }

  auto estimate = [&](const MLApproximation& ml) {
    const std::size_t n0 = ml.points.size();
    const std::size_t stride = n_max / n0;
    const MeshLevel finest(ml.levels.back().mesh_level);
    double sum = 0.0;
    std::vector<double> scratch;
    for (std::size_t r = 0; r < shifts.size(); ++r) {
      const auto approx = evaluate_on_shifted_points(ml, shifts[r]);
      for (std::size_t k = 0; k < n0; ++k) {
        const auto fine = detail::row_on_level(approx, k, finest, m_ref);
        sum += detail::row_l2_diff_sq(ref_mesh, fine, reference[r].row(k * stride), scratch);
      }
    }
    return std::sqrt(sum / static_cast<double>(shifts.size() * n0));
  };

  StudyResult result{"cost", problem.name, {}, {}};
  std::vector<double> sl_err, sl_cost, ml_err, ml_cost;
  for (const auto& p : pairings) {
    const double t0 = cpu_seconds();
    const auto sl = build_single_level(problem.lattice, p.n, problem.kernel, MeshLevel(p.mesh_level), problem.model);
    const double cost = cpu_seconds() - t0;
    const double err = estimate(to_multilevel(sl, problem.lattice.z()));
    result.rows.push_back({"SL", static_cast<double>(p.mesh_level), err, cost});
    sl_err.push_back(err);
    sl_cost.push_back(cost);
  }
  for (std::size_t l = 0; l < pairings.size(); ++l) {
    const auto levels = levels_from_pairings(pairings, l);
    const double t0 = cpu_seconds();
    const auto ml = build_multilevel(problem.lattice, levels, problem.kernel, problem.model);
    const double cost = cpu_seconds() - t0;
    const double err = estimate(ml);
    result.rows.push_back({"ML", static_cast<double>(l), err, cost});
    ml_err.push_back(err);
    ml_cost.push_back(cost);
  }
  if (pairings.size() >= 3) {
    const auto sl_fit = fit_loglog(sl_err, sl_cost);
    const auto ml_fit = fit_loglog(ml_err, ml_cost);
    result.fits["sl_cost_exponent"] = -sl_fit.slope;
    result.fits["ml_cost_exponent"] = -ml_fit.slope;
    // SL cost predicted by its own fit at the finest ML error.
    const double predicted = std::exp2(sl_fit.intercept + sl_fit.slope * std::log2(ml_err.back()));
    result.fits["sl_cost_at_ml_error"] = predicted;
    result.fits["ml_to_sl_cost_ratio"] = ml_cost.back() / predicted;
  }
  return result;
}

}  // namespace mlkpde
