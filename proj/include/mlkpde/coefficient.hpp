#pragma once

// Periodic random diffusion coefficient
//   Psi(x, y) = 1 + sum_{j<=s} sin(2 pi y_j) (C / sqrt 6) j^{-theta} sin(j pi x_1) sin(j pi x_2)
// and the two benchmark presets.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlkpde/errors.hpp"
#include "mlkpde/special_functions.hpp"

namespace mlkpde {

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

class CoefficientModel {
 public:
  CoefficientModel(std::size_t s, double scale, double theta) : s_(s), scale_(scale), theta_(theta) {
    if (s_ == 0) throw ParameterError("coefficient: truncation dimension must be >= 1");
    if (!(scale_ >= 0.0)) throw ParameterError("coefficient: scaling C must be non-negative");
    if (!(theta_ > 1.0)) throw ParameterError("coefficient: decay theta must exceed 1");
    a_min_ = 1.0 - amplitude() * riemann_zeta(theta_);
    a_max_ = 1.0 + amplitude() * riemann_zeta(theta_);
    if (!(a_min_ > 0.0))
      throw ParameterError("coefficient: a_min = 1 - (C/sqrt 6) zeta(theta) must be positive");
  }

  std::size_t dims() const noexcept { return s_; }
  double scale() const noexcept { return scale_; }
  double theta() const noexcept { return theta_; }
  double a_min() const noexcept { return a_min_; }
  double a_max() const noexcept { return a_max_; }

  /// C / sqrt 6.
  double amplitude() const noexcept { return scale_ / std::sqrt(6.0); }

  /// Weight of term j (1-based) before the spatial factor: (C/sqrt 6) j^{-theta} sin(2 pi y_j).
  double term_weight(std::size_t j, double yj) const {
    return amplitude() * std::pow(static_cast<double>(j), -theta_) * std::sin(2.0 * std::numbers::pi * yj);
  }

 private:
  std::size_t s_;
  double scale_;
  double theta_;
  double a_min_ = 1.0;
  double a_max_ = 1.0;
};

/// Psi(x, y); components of y beyond the model dimension are ignored.
inline double eval_coeff(const CoefficientModel& model, double x1, double x2, std::span<const double> y) {
  if (y.size() < model.dims()) throw ParameterError("eval_coeff: y has fewer components than the model");
  detail::CompensatedSum sum;
  sum.add(1.0);
  for (std::size_t j = 1; j <= model.dims(); ++j) {
    const double jd = static_cast<double>(j);
    sum.add(model.term_weight(j, y[j - 1]) * std::sin(jd * std::numbers::pi * x1) *
            std::sin(jd * std::numbers::pi * x2));
  }
  return sum.value();
}

/// bbar_j = C pi j^{1-theta} / (a_min sqrt 6), j = 1..s.
inline std::vector<double> bbar_sequence(const CoefficientModel& model) {
  std::vector<double> out(model.dims());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = model.amplitude() * std::numbers::pi * std::pow(static_cast<double>(j + 1), 1.0 - model.theta()) /
             model.a_min();
  return out;
}

/// b_j = C j^{-theta} / (a_min sqrt 6), j = 1..s.
inline std::vector<double> b_sequence(const CoefficientModel& model) {
  std::vector<double> out(model.dims());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = model.amplitude() * std::pow(static_cast<double>(j + 1), -model.theta()) / model.a_min();
  return out;
}

/// Same model with y_j = 0 for j > s_new.
inline CoefficientModel truncate(const CoefficientModel& model, std::size_t s_new) {
  if (s_new == 0 || s_new > model.dims()) throw ParameterError("truncate: s_new must lie in [1, s]");
  return {s_new, model.scale(), model.theta()};
}

struct Preset {
  std::string name;
  double scale;
  double theta;
  std::size_t s = 64;

  CoefficientModel model() const { return {s, scale, theta}; }
  CoefficientModel model(std::size_t dims) const { return {dims, scale, theta}; }
};

inline Preset easy_preset() { return {"easy", 1.5, 3.6}; }
inline Preset hard_preset() { return {"hard", 0.2, 1.2}; }

inline Preset preset_by_name(std::string_view name) {
  if (name == "easy") return easy_preset();
  if (name == "hard") return hard_preset();
  throw ParameterError("unknown preset '" + std::string(name) + "' (expected easy or hard)");
}

}  // namespace mlkpde
