#include "frim/phase_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "frim/errors.hpp"

namespace frim {

int PhaseGrid::side_for(int scales) {
  if (scales < 1 || scales > 15) throw ShapeError("scale count must lie in [1, 15], got " + std::to_string(scales));
  return (1 << scales) + 1;
}

int PhaseGrid::scales_for_side(int side) {
  for (int p = 1; p <= 15; ++p) {
    if ((1 << p) + 1 == side) return p;
  }
  throw ShapeError("grid side must be 2^p + 1 with p >= 1, got " + std::to_string(side));
}

PhaseGrid::PhaseGrid(int scales)
    : scales_(scales), side_(side_for(scales)),
      values_(static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_), 0.0) {}

PhaseGrid::PhaseGrid(int scales, std::vector<double> values)
    : scales_(scales), side_(side_for(scales)), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_)) {
    throw ShapeError("expected " + std::to_string(side_ * side_) + " samples, got " +
                     std::to_string(values_.size()));
  }
}

bool PhaseGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace frim
