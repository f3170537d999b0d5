#pragma once

// Piecewise-linear finite elements on nested uniform triangulations of the
// unit square. Level m has n = 2^m cells per side, each split along its
// lower-left to upper-right diagonal, and (n-1)^2 interior unknowns in
// lexicographic order (x fastest). Boundary values are zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mlkpde/coefficient.hpp"
#include "mlkpde/errors.hpp"

namespace mlkpde {

class MeshLevel {
 public:
  explicit MeshLevel(int m) : m_(m) {
    if (m < 1 || m > 10) throw ParameterError("mesh level must lie in [1, 10]");
  }

  int level() const noexcept { return m_; }
  std::size_t cells_per_side() const noexcept { return std::size_t{1} << m_; }
  double width() const noexcept { return 1.0 / static_cast<double>(cells_per_side()); }
  std::size_t interior_count() const noexcept {
    const auto k = cells_per_side() - 1;
    return k * k;
  }
  std::size_t triangle_count() const noexcept { return 2 * cells_per_side() * cells_per_side(); }

  /// Interior unknown index of grid node (i, j), or -1 on the boundary.
  std::ptrdiff_t node_index(std::size_t i, std::size_t j) const noexcept {
    const auto n = cells_per_side();
    if (i == 0 || j == 0 || i >= n || j >= n) return -1;
    return static_cast<std::ptrdiff_t>((j - 1) * (n - 1) + (i - 1));
  }

  friend bool operator==(const MeshLevel&, const MeshLevel&) = default;

 private:
  int m_;
};

inline MeshLevel build_mesh(int m) { return MeshLevel(m); }

/// Grid-node vertices of the two triangles in cell (i, j): the lower-right
/// one (i,j),(i+1,j),(i+1,j+1) and the upper-left one (i,j),(i+1,j+1),(i,j+1).
inline std::array<std::array<std::size_t, 2>, 3> triangle_vertices(std::size_t i, std::size_t j, bool upper) {
  if (!upper) return {{{i, j}, {i + 1, j}, {i + 1, j + 1}}};
  return {{{i, j}, {i + 1, j + 1}, {i, j + 1}}};
}

struct FESolution {
  MeshLevel mesh;
  std::vector<double> coeffs;

  FESolution(MeshLevel level, std::vector<double> values) : mesh(level), coeffs(std::move(values)) {
    if (coeffs.size() != mesh.interior_count()) throw ParameterError("FE coefficient count does not match mesh");
  }
  explicit FESolution(MeshLevel level) : mesh(level), coeffs(level.interior_count(), 0.0) {}

  /// Nodal value at grid node (i, j); zero on the boundary.
  double node_value(std::size_t i, std::size_t j) const {
    const auto idx = mesh.node_index(i, j);
    return idx < 0 ? 0.0 : coeffs[static_cast<std::size_t>(idx)];
  }
};

/// Symmetric CSR matrix plus load vector.
struct SparseSystem {
  std::size_t size = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  std::vector<double> load;

  void multiply(std::span<const double> x, std::span<double> out) const {
    for (std::size_t r = 0; r < size; ++r) {
      double acc = 0.0;
      for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) acc += values[p] * x[col_idx[p]];
      out[r] = acc;
    }
  }

  double entry(std::size_t r, std::size_t c) const {
    for (std::size_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
      if (col_idx[p] == c) return values[p];
    return 0.0;
  }
};

using SourceFunction = std::function<double(double, double)>;

inline double default_source(double /*x1*/, double x2) { return x2; }

/// Assembles stiffness matrices for one mesh and coefficient model at many
/// parameter values. The sparsity pattern, per-triangle scatter slots,
/// source integrals and sin(j pi x) tables at centroids are built once.
class Assembler {
 public:
  Assembler(MeshLevel mesh, CoefficientModel model, SourceFunction source = default_source)
      : mesh_(mesh), model_(std::move(model)) {
    const std::size_t n = mesh_.cells_per_side();
    const double h = mesh_.width();
    const double area = 0.5 * h * h;

    // Centroid coordinates are (i + 1/3) h or (i + 2/3) h: index q in units of h/3.
    const std::size_t s = model_.dims();
    const std::size_t nq = 3 * n + 1;
    sin_table_.assign(s * nq, 0.0);
    for (std::size_t j = 0; j < s; ++j)
      for (std::size_t q = 0; q < nq; ++q)
        sin_table_[j * nq + q] =
            std::sin(static_cast<double>(j + 1) * std::numbers::pi * static_cast<double>(q) * h / 3.0);

    triangles_.reserve(mesh_.triangle_count());
    for (std::size_t cj = 0; cj < n; ++cj) {
      for (std::size_t ci = 0; ci < n; ++ci) {
        for (bool upper : {false, true}) {
          TriangleRecord t{};
          const auto verts = triangle_vertices(ci, cj, upper);
          for (int a = 0; a < 3; ++a) t.dofs[a] = mesh_.node_index(verts[a][0], verts[a][1]);
          t.upper = upper;
          t.qx = upper ? 3 * ci + 1 : 3 * ci + 2;
          t.qy = upper ? 3 * cj + 2 : 3 * cj + 1;
          t.source_share = source(static_cast<double>(t.qx) * h / 3.0, static_cast<double>(t.qy) * h / 3.0) * area / 3.0;
          triangles_.push_back(t);
        }
      }
    }
    build_pattern();
  }

  const MeshLevel& mesh() const noexcept { return mesh_; }
  const CoefficientModel& model() const noexcept { return model_; }

  /// Psi at the centroid of every triangle, in assembly order.
  std::vector<double> centroid_coefficients(std::span<const double> y) const {
    if (y.size() < model_.dims()) throw ParameterError("assemble: y has fewer components than the model");
    const std::size_t s = model_.dims();
    const std::size_t nq = 3 * mesh_.cells_per_side() + 1;
    std::vector<double> w(s);
    for (std::size_t j = 0; j < s; ++j) w[j] = model_.term_weight(j + 1, y[j]);
    std::vector<double> psi(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      detail::CompensatedSum sum;
      sum.add(1.0);
      const auto& tri = triangles_[t];
      for (std::size_t j = 0; j < s; ++j)
        sum.add(w[j] * sin_table_[j * nq + tri.qx] * sin_table_[j * nq + tri.qy]);
      psi[t] = sum.value();
    }
    return psi;
  }

  SparseSystem assemble(std::span<const double> y) const { return assemble_with(centroid_coefficients(y)); }

  /// Assembly from precomputed centroid coefficients.
  SparseSystem assemble_with(std::span<const double> psi) const {
    if (psi.size() != triangles_.size()) throw ParameterError("assemble_with: need one coefficient per triangle");
    SparseSystem sys;
    sys.size = mesh_.interior_count();
    sys.row_ptr = row_ptr_;
    sys.col_idx = col_idx_;
    sys.values.assign(col_idx_.size(), 0.0);
    sys.load.assign(sys.size, 0.0);
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const auto& tri = triangles_[t];
      if (!(psi[t] > 0.0))
        throw CoefficientBoundError("coefficient is not positive at a triangle centroid");
      const auto& local = tri.upper ? kUpperStiffness : kLowerStiffness;
      for (int a = 0; a < 3; ++a) {
        if (tri.dofs[a] < 0) continue;
        sys.load[static_cast<std::size_t>(tri.dofs[a])] += tri.source_share;
        for (int b = 0; b < 3; ++b) {
          const auto slot = slots_[t][a * 3 + b];
          if (slot >= 0) sys.values[static_cast<std::size_t>(slot)] += psi[t] * local[a][b];
        }
      }
    }
    return sys;
  }

 private:
  // Element matrices (h-independent in 2D) for unit coefficient.
  static constexpr double kLowerStiffness[3][3] = {{0.5, -0.5, 0.0}, {-0.5, 1.0, -0.5}, {0.0, -0.5, 0.5}};
  static constexpr double kUpperStiffness[3][3] = {{0.5, 0.0, -0.5}, {0.0, 0.5, -0.5}, {-0.5, -0.5, 1.0}};

  struct TriangleRecord {
    std::array<std::ptrdiff_t, 3> dofs;
    bool upper;
    std::size_t qx;
    std::size_t qy;
    double source_share;
  };

  void build_pattern() {
    const std::size_t m = mesh_.interior_count();
    std::vector<std::vector<std::size_t>> cols(m);
    for (const auto& t : triangles_)
      for (auto a : t.dofs)
        for (auto b : t.dofs)
          if (a >= 0 && b >= 0) cols[static_cast<std::size_t>(a)].push_back(static_cast<std::size_t>(b));
    row_ptr_.assign(m + 1, 0);
    for (std::size_t r = 0; r < m; ++r) {
      auto& c = cols[r];
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      row_ptr_[r + 1] = row_ptr_[r] + c.size();
      col_idx_.insert(col_idx_.end(), c.begin(), c.end());
    }
    slots_.resize(triangles_.size());
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
          std::ptrdiff_t slot = -1;
          const auto ra = triangles_[t].dofs[a];
          const auto cb = triangles_[t].dofs[b];
          if (ra >= 0 && cb >= 0) {
            const auto r = static_cast<std::size_t>(ra);
            const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
            const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
            slot = std::lower_bound(begin, end, static_cast<std::size_t>(cb)) - col_idx_.begin();
          }
          slots_[t][a * 3 + b] = slot;
        }
      }
    }
  }

  MeshLevel mesh_;
  CoefficientModel model_;
  std::vector<double> sin_table_;
  std::vector<TriangleRecord> triangles_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_idx_;
  std::vector<std::array<std::ptrdiff_t, 9>> slots_;
};

inline SparseSystem assemble(const MeshLevel& mesh, const CoefficientModel& model, std::span<const double> y,
                             SourceFunction source = default_source) {
  return Assembler(mesh, model, std::move(source)).assemble(y);
}

struct SolveStats {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

inline constexpr double kCgTolerance = 1e-12;

/// Jacobi-preconditioned conjugate gradients to relative residual 1e-12,
/// at most 20 M iterations. The true residual is checked on exit and CG is
/// restarted from the current iterate if recurrence drift left it too large.
inline FESolution solve_fe(const MeshLevel& mesh, const SparseSystem& sys, SolveStats* stats = nullptr) {
  const std::size_t m = sys.size;
  if (m != mesh.interior_count()) throw ParameterError("solve_fe: system size does not match mesh");
  std::vector<double> x(m, 0.0), r(sys.load), z(m), p(m), q(m), inv_diag(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double d = sys.entry(i, i);
    if (!(d > 0.0)) throw NumericError("solve_fe: non-positive diagonal entry");
    inv_diag[i] = 1.0 / d;
  }
  auto dot = [](std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  };
  const double bnorm = std::sqrt(dot(sys.load, sys.load));
  if (bnorm == 0.0) {
    if (stats) *stats = {};
    return FESolution(mesh, std::move(x));
  }
  const std::size_t cap = 20 * m;
  std::size_t it = 0;
  double rel = 1.0;
  while (it < cap) {
    for (std::size_t i = 0; i < m; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    rel = std::sqrt(dot(r, r)) / bnorm;
    while (rel > kCgTolerance && it < cap) {
      sys.multiply(p, q);
      const double step = rz / dot(p, q);
      for (std::size_t i = 0; i < m; ++i) {
        x[i] += step * p[i];
        r[i] -= step * q[i];
      }
      ++it;
      rel = std::sqrt(dot(r, r)) / bnorm;
      for (std::size_t i = 0; i < m; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < m; ++i) p[i] = z[i] + beta * p[i];
    }
    sys.multiply(x, q);
    for (std::size_t i = 0; i < m; ++i) r[i] = sys.load[i] - q[i];
    rel = std::sqrt(dot(r, r)) / bnorm;
    if (rel <= kCgTolerance) break;
  }
  if (rel > kCgTolerance) throw NoConvergence(it, rel);
  if (stats) *stats = {it, rel};
  return FESolution(mesh, std::move(x));
}

/// Exact re-expression of a level-m function on level m+1.
inline FESolution prolongate(const FESolution& coarse, const MeshLevel& fine_mesh) {
  if (fine_mesh.level() != coarse.mesh.level() + 1)
    throw ParameterError("prolongate: fine level must be coarse level + 1");
  FESolution fine(fine_mesh);
  const std::size_t nf = fine_mesh.cells_per_side();
  for (std::size_t J = 1; J < nf; ++J) {
    for (std::size_t I = 1; I < nf; ++I) {
      const std::size_t i = I / 2, j = J / 2;
      double v;
      if (I % 2 == 0 && J % 2 == 0)
        v = coarse.node_value(i, j);
      else if (J % 2 == 0)
        v = 0.5 * (coarse.node_value(i, j) + coarse.node_value(i + 1, j));
      else if (I % 2 == 0)
        v = 0.5 * (coarse.node_value(i, j) + coarse.node_value(i, j + 1));
      else  // midpoint of the cell diagonal
        v = 0.5 * (coarse.node_value(i, j) + coarse.node_value(i + 1, j + 1));
      fine.coeffs[static_cast<std::size_t>(fine_mesh.node_index(I, J))] = v;
    }
  }
  return fine;
}

inline FESolution prolongate_to(FESolution sol, int level) {
  if (level < sol.mesh.level()) throw ParameterError("prolongate_to: target level is coarser");
  while (sol.mesh.level() < level) sol = prolongate(sol, MeshLevel(sol.mesh.level() + 1));
  return sol;
}

/// Squared L2 norm of the piecewise-linear function with interior nodal
/// values `coeffs`, through the element mass matrix h^2/24 [2 1 1; 1 2 1; 1 1 2].
inline double l2_norm_squared(const MeshLevel& mesh, std::span<const double> coeffs) {
  if (coeffs.size() != mesh.interior_count()) throw ParameterError("l2_norm: coefficient count does not match mesh");
  const std::size_t n = mesh.cells_per_side();
  const double h = mesh.width();
  auto value = [&](std::size_t i, std::size_t j) {
    const auto idx = mesh.node_index(i, j);
    return idx < 0 ? 0.0 : coeffs[static_cast<std::size_t>(idx)];
  };
  auto tri = [](double a, double b, double c) { return a * a + b * b + c * c + a * b + b * c + c * a; };
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v00 = value(i, j), v10 = value(i + 1, j);
      const double v11 = value(i + 1, j + 1), v01 = value(i, j + 1);
      acc += tri(v00, v10, v11) + tri(v00, v11, v01);
    }
  }
  return std::max(acc, 0.0) * h * h / 12.0;
}

inline double l2_norm(const FESolution& sol) { return std::sqrt(l2_norm_squared(sol.mesh, sol.coeffs)); }

/// L2 distance; the coarser argument is prolongated to the finer level first.
inline double l2_diff(const FESolution& a, const FESolution& b) {
  const int level = std::max(a.mesh.level(), b.mesh.level());
  FESolution fa = prolongate_to(a, level);
  const FESolution fb = prolongate_to(b, level);
  for (std::size_t i = 0; i < fa.coeffs.size(); ++i) fa.coeffs[i] -= fb.coeffs[i];
  return l2_norm(fa);
}

/// Up to three (unknown index, barycentric weight) pairs of the basis
/// functions that are nonzero at x; boundary vertices are omitted.
struct BasisStencil {
  std::array<std::size_t, 3> index{};
  std::array<double, 3> weight{};
  std::size_t count = 0;
};

inline BasisStencil basis_at(const MeshLevel& mesh, double x1, double x2) {
  if (!(x1 >= 0.0 && x1 <= 1.0 && x2 >= 0.0 && x2 <= 1.0))
    throw DomainError("point outside the unit square");
  BasisStencil st;
  const std::size_t n = mesh.cells_per_side();
  const double sx = x1 * static_cast<double>(n), sy = x2 * static_cast<double>(n);
  const std::size_t i = std::min(static_cast<std::size_t>(sx), n - 1);
  const std::size_t j = std::min(static_cast<std::size_t>(sy), n - 1);
  const double xi = sx - static_cast<double>(i), eta = sy - static_cast<double>(j);
  std::array<std::array<std::size_t, 2>, 3> verts;
  std::array<double, 3> w;
  if (xi >= eta) {
    verts = triangle_vertices(i, j, false);
    w = {1.0 - xi, xi - eta, eta};
  } else {
    verts = triangle_vertices(i, j, true);
    w = {1.0 - eta, xi, eta - xi};
  }
  for (int a = 0; a < 3; ++a) {
    const auto idx = mesh.node_index(verts[a][0], verts[a][1]);
    if (idx < 0 || w[a] == 0.0) continue;
    st.index[st.count] = static_cast<std::size_t>(idx);
    st.weight[st.count] = w[a];
    ++st.count;
  }
  return st;
}

/// Point value of the piecewise-linear function; 0 on the boundary.
inline double evaluate_fe(const FESolution& sol, double x1, double x2) {
  const auto st = basis_at(sol.mesh, x1, x2);
  double v = 0.0;
  for (std::size_t a = 0; a < st.count; ++a) v += st.weight[a] * sol.coeffs[st.index[a]];
  return v;
}

/// L2 distance to a smooth function using a degree-5 seven-point rule per triangle.
inline double l2_error_against(const FESolution& sol, const std::function<double(double, double)>& exact) {
  static constexpr double kA = 0.059715871789770, kB = 0.470142064105115;
  static constexpr double kC = 0.797426985353087, kD = 0.101286507323456;
  static constexpr double kW0 = 0.225, kW1 = 0.132394152788506, kW2 = 0.125939180544827;
  static constexpr std::array<std::array<double, 4>, 7> rule = {{{1.0 / 3, 1.0 / 3, 1.0 / 3, kW0},
                                                                 {kA, kB, kB, kW1},
                                                                 {kB, kA, kB, kW1},
                                                                 {kB, kB, kA, kW1},
                                                                 {kC, kD, kD, kW2},
                                                                 {kD, kC, kD, kW2},
                                                                 {kD, kD, kC, kW2}}};
  const std::size_t n = sol.mesh.cells_per_side();
  const double h = sol.mesh.width();
  const double area = 0.5 * h * h;
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      for (bool upper : {false, true}) {
        const auto v = triangle_vertices(i, j, upper);
        std::array<double, 3> vals;
        for (int a = 0; a < 3; ++a) vals[a] = sol.node_value(v[a][0], v[a][1]);
        for (const auto& q : rule) {
          double px = 0.0, py = 0.0, uh = 0.0;
          for (int a = 0; a < 3; ++a) {
            px += q[a] * static_cast<double>(v[a][0]) * h;
            py += q[a] * static_cast<double>(v[a][1]) * h;
            uh += q[a] * vals[a];
          }
          const double e = uh - exact(px, py);
          acc += q[3] * e * e * area;
        }
      }
    }
  }
  return std::sqrt(acc);
}

}  // namespace mlkpde
