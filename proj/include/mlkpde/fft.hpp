#pragma once

// Thin RAII layer over FFTW for batched real transforms along the rows of a
// point-major matrix (each column is one signal of length rows()).

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "mlkpde/matrix.hpp"

namespace mlkpde::detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* plan) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

/// Half spectrum, (n/2 + 1) x batch, frequency-major like the input.
struct HalfSpectrum {
  std::size_t n = 0;
  std::size_t batch = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& at(std::size_t freq, std::size_t col) { return values[freq * batch + col]; }
  std::complex<double> at(std::size_t freq, std::size_t col) const { return values[freq * batch + col]; }
};

/// Forward real DFT of every column of a rows x cols row-major buffer.
inline HalfSpectrum rfft_columns(std::span<const double> data, std::size_t rows, std::size_t cols) {
  HalfSpectrum out{rows, cols, std::vector<std::complex<double>>((rows / 2 + 1) * cols)};
  if (rows == 0 || cols == 0) return out;
  std::vector<double> in(data.begin(), data.end());
  int n = static_cast<int>(rows);
  Plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_many_dft_r2c(1, &n, static_cast<int>(cols), in.data(), nullptr, static_cast<int>(cols), 1,
                                      reinterpret_cast<fftw_complex*>(out.values.data()), nullptr,
                                      static_cast<int>(cols), 1, FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());
  return out;
}

/// Inverse of rfft_columns including the 1/n normalisation. Consumes spec.
inline RowMatrix irfft_columns(HalfSpectrum spec) {
  RowMatrix out(spec.n, spec.batch);
  if (spec.n == 0 || spec.batch == 0) return out;
  int n = static_cast<int>(spec.n);
  const int cols = static_cast<int>(spec.batch);
  Plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan.reset(fftw_plan_many_dft_c2r(1, &n, cols, reinterpret_cast<fftw_complex*>(spec.values.data()), nullptr,
                                      cols, 1, out.data().data(), nullptr, cols, 1, FFTW_ESTIMATE));
  }
  fftw_execute(plan.get());
  const double scale = 1.0 / static_cast<double>(spec.n);
  for (auto& v : out.data()) v *= scale;
  return out;
}

inline HalfSpectrum rfft(std::span<const double> signal) { return rfft_columns(signal, signal.size(), 1); }

}  // namespace mlkpde::detail
