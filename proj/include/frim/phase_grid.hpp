#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace frim {

/// Square (2^p + 1)^2 lattice of phase samples, row-major with x the fast
/// index. The same storage holds either wavefront samples w or generators
/// u; the fractal operators convert between the two in place.
class PhaseGrid {
 public:
  PhaseGrid() = default;
  explicit PhaseGrid(int scales);
  PhaseGrid(int scales, std::vector<double> values);

  /// 2^p + 1. Throws ShapeError for p < 1.
  static int side_for(int scales);
  /// Inverse of side_for. Throws ShapeError unless n = 2^p + 1 with p >= 1.
  static int scales_for_side(int side);

  int scales() const noexcept { return scales_; }
  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(side_) + static_cast<std::size_t>(x);
  }
  double& operator()(int x, int y) noexcept { return values_[index(x, y)]; }
  double operator()(int x, int y) const noexcept { return values_[index(x, y)]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::vector<double>& storage() noexcept { return values_; }

  bool all_finite() const;

 private:
  int scales_ = 0;
  int side_ = 0;
  std::vector<double> values_;
};

}  // namespace frim
