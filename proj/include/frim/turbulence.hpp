#pragma once

#include <functional>

namespace frim {

enum class StructureKind { Kolmogorov, Custom };

/// Phase structure function f(r) together with the per-sample variance
/// sigma^2 used to turn it into a stationary covariance.
///
/// Lengths are in units of the fine-grid sampling step, phases in radians.
/// Immutable once constructed.
class StructureFunction {
 public:
  /// Kolmogorov law 6.88 (r/r0)^(5/3). The variance is fixed so that the
  /// covariance between the two most remote corners of a square support of
  /// side `outer_extent` is exactly zero: sigma^2 = f(sqrt(2) D) / 2.
  static StructureFunction kolmogorov(double r0, double outer_extent);

  /// Kolmogorov law with an explicitly chosen variance.
  static StructureFunction kolmogorov_with_variance(double r0, double variance);

  /// Arbitrary law f (must satisfy f(0) = 0 and be nondecreasing).
  static StructureFunction custom(std::function<double(double)> law, double variance);

  StructureKind kind() const noexcept { return kind_; }
  double r0() const noexcept { return r0_; }
  double variance() const noexcept { return variance_; }

  /// f(r). Throws DomainError for r < 0.
  double evaluate(double r) const;

  /// sigma^2 - f(r) / 2.
  double covariance(double r) const { return variance_ - 0.5 * evaluate(r); }

 private:
  StructureFunction(StructureKind kind, double r0, double variance,
                    std::function<double(double)> law);

  StructureKind kind_;
  double r0_;
  double variance_;
  std::function<double(double)> law_;
};

/// 6.88 (r / r0)^(5/3).
double kolmogorov_structure(double r, double r0);

}  // namespace frim
