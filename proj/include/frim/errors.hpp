#pragma once

#include <stdexcept>
#include <string>

namespace frim {

/// Argument outside the mathematical domain of an operation (negative
/// separation, non-positive Fried parameter, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Buffer or grid whose size does not match what an operator expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file or command-line value.
class FormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A derived quantity that must be positive (interpolation gain, diagonal
/// preconditioner entry, outer eigenvalue) came out non-positive.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conjugate gradients met a non-positive curvature p'Ap.
class IndefiniteOperatorError : public std::runtime_error {
 public:
  IndefiniteOperatorError(const std::string& what, double curvature, int iteration)
      : std::runtime_error(what), curvature_(curvature), iteration_(iteration) {}

  double curvature() const noexcept { return curvature_; }
  int iteration() const noexcept { return iteration_; }

 private:
  double curvature_;
  int iteration_;
};

}  // namespace frim
