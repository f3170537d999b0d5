#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlkpde {

/// Bad input: violated precondition, invalid divisor, out-of-range parameter.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidDivisor : public ParameterError {
 public:
  InvalidDivisor(std::size_t n_max, std::size_t n)
      : ParameterError(std::to_string(n) + " does not divide " +
                       std::to_string(n_max)) {}
};

class DomainError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Failure during computation on otherwise valid input.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IllConditionedKernel : public NumericError {
 public:
  IllConditionedKernel(std::size_t index, double value, double max_value)
      : NumericError("kernel matrix eigenvalue " + std::to_string(index) +
                     " = " + std::to_string(value) +
                     " is below 1e-12 x max eigenvalue " +
                     std::to_string(max_value)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class CoefficientBoundError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NoConvergence : public NumericError {
 public:
  NoConvergence(std::size_t iterations, double residual)
      : NumericError("CG did not converge after " + std::to_string(iterations) +
                     " iterations, relative residual " +
                     std::to_string(residual)),
        residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace mlkpde
