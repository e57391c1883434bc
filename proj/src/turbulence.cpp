#include "frim/turbulence.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "frim/errors.hpp"

namespace frim {

double kolmogorov_structure(double r, double r0) {
  if (!(r0 > 0.0)) throw DomainError("Fried parameter must be positive, got " + std::to_string(r0));
  if (r < 0.0) throw DomainError("separation must be nonnegative, got " + std::to_string(r));
  return 6.88 * std::pow(r / r0, 5.0 / 3.0);
}

StructureFunction::StructureFunction(StructureKind kind, double r0, double variance,
                                     std::function<double(double)> law)
    : kind_(kind), r0_(r0), variance_(variance), law_(std::move(law)) {}

StructureFunction StructureFunction::kolmogorov(double r0, double outer_extent) {
  if (!(outer_extent > 0.0)) throw DomainError("outer extent must be positive");
  const double variance = 0.5 * kolmogorov_structure(std::numbers::sqrt2 * outer_extent, r0);
  return kolmogorov_with_variance(r0, variance);
}

StructureFunction StructureFunction::kolmogorov_with_variance(double r0, double variance) {
  if (!(r0 > 0.0)) throw DomainError("Fried parameter must be positive, got " + std::to_string(r0));
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw DomainError("variance must be finite and nonnegative");
  return StructureFunction(StructureKind::Kolmogorov, r0, variance,
                           [r0](double r) { return kolmogorov_structure(r, r0); });
}

StructureFunction StructureFunction::custom(std::function<double(double)> law, double variance) {
  if (!law) throw DomainError("structure law must be callable");
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw DomainError("variance must be finite and nonnegative");
  return StructureFunction(StructureKind::Custom, 0.0, variance, std::move(law));
}

double StructureFunction::evaluate(double r) const {
  if (r < 0.0) throw DomainError("separation must be nonnegative, got " + std::to_string(r));
  return law_(r);
}

}  // namespace frim
