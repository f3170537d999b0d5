#pragma once

// Binary approximation file, all fields little-endian:
//   "MLKA"                      4 bytes
//   version                     uint32 (= 1)
//   L                           uint32 (max level; L + 1 level records follow)
//   s                           uint32
//   alpha                       uint32
//   per level: N_l uint64, m_l uint32
//   gamma_1..gamma_s            float64
//   z_1..z_s                    int64
//   per level: A_l row-major    float64 (N_l x (2^{m_l} - 1)^2)

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mlkpde/approximation.hpp"
#include "mlkpde/errors.hpp"

namespace mlkpde {

inline constexpr std::uint32_t kApproximationFormatVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

template <class T>
void write_le(std::ostream& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw ParameterError("approximation file is truncated");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace detail

inline void save_approximation(const MLApproximation& ml, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot write " + path);
  out.write("MLKA", 4);
  detail::write_le<std::uint32_t>(out, kApproximationFormatVersion);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ml.max_level()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ml.kernel.dims()));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ml.kernel.alpha()));
  for (const auto& lev : ml.levels) {
    detail::write_le<std::uint64_t>(out, lev.n);
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(lev.mesh_level));
  }
  for (double g : ml.kernel.gamma()) detail::write_le<double>(out, g);
  for (auto zj : ml.z) detail::write_le<std::int64_t>(out, static_cast<std::int64_t>(zj));
  for (const auto& lev : ml.levels)
    for (double v : lev.coeffs.data()) detail::write_le<double>(out, v);
  if (!out) throw ParameterError("failed writing " + path);
}

inline MLApproximation load_approximation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MLKA", 4) != 0)
    throw ParameterError(path + " is not an MLKA approximation file");
  const auto version = detail::read_le<std::uint32_t>(in);
  if (version != kApproximationFormatVersion)
    throw ParameterError("unsupported approximation file version " + std::to_string(version));
  const auto max_level = detail::read_le<std::uint32_t>(in);
  const auto s = detail::read_le<std::uint32_t>(in);
  const auto alpha = detail::read_le<std::uint32_t>(in);
  std::vector<LevelSpec> specs;
  for (std::uint32_t l = 0; l <= max_level; ++l) {
    const auto n = detail::read_le<std::uint64_t>(in);
    const auto m = detail::read_le<std::uint32_t>(in);
    specs.push_back({static_cast<std::size_t>(n), static_cast<int>(m)});
  }
  std::vector<double> gamma(s);
  for (auto& g : gamma) g = detail::read_le<double>(in);
  std::vector<std::uint64_t> z(s);
  for (auto& zj : z) zj = static_cast<std::uint64_t>(detail::read_le<std::int64_t>(in));

  const std::size_t n0 = specs.front().n;
  if (n0 == 0 || !std::has_single_bit(n0)) throw ParameterError("approximation file: N_0 must be a power of two");
  for (std::size_t l = 1; l < specs.size(); ++l)
    if (specs[l].n == 0 || specs[l - 1].n % specs[l].n != 0) throw InvalidDivisor(specs[l - 1].n, specs[l].n);
  PointSet points(n0, s);
  for (std::size_t k = 0; k < n0; ++k)
    for (std::size_t j = 0; j < s; ++j)
      points[k][j] = static_cast<double>((k * (z[j] % n0)) % n0) / static_cast<double>(n0);

  MLApproximation ml{z, KernelSpec(static_cast<int>(alpha), gamma), std::move(points), {}};
  for (const auto& spec : specs) {
    const MeshLevel mesh(spec.mesh_level);
    RowMatrix coeffs(spec.n, mesh.interior_count());
    for (auto& v : coeffs.data()) v = detail::read_le<double>(in);
    ml.levels.push_back({spec.n, spec.mesh_level, std::move(coeffs)});
  }
  return ml;
}

}  // namespace mlkpde
