#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace netlds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for all recoverable numerical failures raised by the library.
/// Precondition violations use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The penalized normal-equation operator (or a Gram block) has no inverse.
class SingularOperatorError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Explosive dynamics produced values outside the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Column-major vec() of a square matrix.
inline Vector vec(const Matrix& a) {
  return Eigen::Map<const Vector>(a.data(), a.size());
}

/// Inverse of vec() for a d x d matrix.
inline Matrix unvec(const Eigen::Ref<const Vector>& v, Index d) {
  return Eigen::Map<const Matrix>(v.data(), d, d);
}

}  // namespace netlds
