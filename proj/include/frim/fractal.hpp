#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "frim/errors.hpp"
#include "frim/flops.hpp"
#include "frim/phase_grid.hpp"
#include "frim/turbulence.hpp"

namespace frim {

/// Interpolation weights for a point whose four parents are equidistant
/// (cell centre from corners, or interior edge midpoint from its two
/// endpoints and two neighbouring centres).
struct FourParentWeights {
  double gain = 0.0;  // alpha_0
  double side = 0.0;  // common weight of the four parents
};

/// Boundary edge midpoint: two edge endpoints plus the single interior
/// cell centre.
struct TriangleWeights {
  double gain = 0.0;
  double edge = 0.0;      // each endpoint
  double interior = 0.0;  // the cell centre
};

/// Weights used when refining a lattice of spacing `step` to step / 2.
struct ScaleCoefficients {
  int step = 0;  // parent cell size r in grid steps (a power of two)
  FourParentWeights square;
  TriangleWeights triangle;
  FourParentWeights diamond;
};

/// Outermost 4x4 factor acting on the grid corners, taken in the cyclic
/// order (0,0), (n-1,0), (n-1,n-1), (0,n-1). Columns of `forward` are the
/// piston, waffle, tip and tilt modes scaled by their standard deviations.
struct OuterOperator {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::array<std::array<double, 4>, 4> forward{};
  std::array<std::array<double, 4>, 4> inverse{};
  std::array<std::size_t, 4> corners{};
};

/// Closed-form weight and squared gain before the positivity check.
struct ClosedForm4 {
  double side;
  double gain_squared;
};
struct ClosedForm3 {
  double edge;
  double interior;
  double gain_squared;
};

// Closed forms take sigma^2 = c(0) and half structure values g(d) = f(d) / 2
// = sigma^2 - c(d), which avoids cancelling the large common variance.

/// Centre of a square cell: parents at r/sqrt2, mutual distances r and
/// sqrt2 r. Arguments are sigma^2, g(r/sqrt2), g(r), g(sqrt2 r).
ClosedForm4 square_closed_form(double c0, double g2, double g3, double g4);
/// Boundary edge midpoint. Arguments are sigma^2, g(r/2), g(r/sqrt2), g(r).
ClosedForm3 triangle_closed_form(double c0, double g1, double g2, double g3);
/// Interior edge midpoint: the square rule with r replaced by r/sqrt2.
ClosedForm4 diamond_closed_form(double c0, double g1, double g2, double g3);

/// Raised when alpha_0^2 = sigma^2 - sum_j C_0j alpha_j comes out negative.
class RadicandError : public ConstructionError {
 public:
  RadicandError(const std::string& what, double radicand)
      : ConstructionError(what), radicand_(radicand) {}
  double radicand() const noexcept { return radicand_; }

 private:
  double radicand_;
};

struct NumericCoefficients {
  std::vector<double> weights;
  double gain = 0.0;
};

/// Generic solve of  sum_j C_ij alpha_j = C_0i,  alpha_0^2 = sigma^2 - sum_j C_0j alpha_j
/// by Gaussian elimination with partial pivoting, done on sigma^2 - C where
/// that is nonsingular. `parent_cov` is m x m row major. Throws
/// ConstructionError when singular, RadicandError when the gain radicand is
/// negative.
NumericCoefficients solve_coefficients_numeric(std::span<const double> parent_cov,
                                               std::span<const double> cross_cov, double sigma2);

struct FractalCoefficients {
  OuterOperator outer;
  std::vector<ScaleCoefficients> levels;  // coarsest (step 2^p) to finest (step 2)
};

/// Evaluates the closed-form coefficients of every refinement level of a
/// (2^p + 1)^2 grid. Throws ConstructionError when any gain or outer
/// eigenvalue is not strictly positive.
FractalCoefficients build_coefficients(const StructureFunction& sf, int scales);

/// Inclusive bounding box of grid indices.
struct SupportBox {
  int x0 = 0;
  int x1 = 0;
  int y0 = 0;
  int y1 = 0;
};

/// Fractal factor K of the prior covariance (C = K K^T) and its inverse and
/// transposes, each applied in place in O(N). Coefficients depend only on
/// the scale, so storage is O(p).
class FractalOperator {
 public:
  FractalOperator(const StructureFunction& sf, int scales);
  FractalOperator(FractalCoefficients coefficients, int scales);

  int scales() const noexcept { return scales_; }
  const FractalCoefficients& coefficients() const noexcept { return coefficients_; }
  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_); }

  const OuterOperator& outer() const noexcept { return coefficients_.outer; }
  const std::vector<ScaleCoefficients>& levels() const noexcept { return coefficients_.levels; }

  /// u -> w = K u. Coarse to fine; centres before edge midpoints.
  void apply(std::span<double> grid, FlopCounter* flops = nullptr) const;
  /// w -> u = K^-1 w. Fine to coarse, then the outer inverse.
  void apply_inverse(std::span<double> grid, FlopCounter* flops = nullptr) const;
  /// v -> K^T v.
  void apply_transpose(std::span<double> grid, FlopCounter* flops = nullptr) const;
  /// v -> K^-T v.
  void apply_inverse_transpose(std::span<double> grid, FlopCounter* flops = nullptr) const;

  void apply(PhaseGrid& grid, FlopCounter* flops = nullptr) const;
  void apply_inverse(PhaseGrid& grid, FlopCounter* flops = nullptr) const;
  void apply_transpose(PhaseGrid& grid, FlopCounter* flops = nullptr) const;
  void apply_inverse_transpose(PhaseGrid& grid, FlopCounter* flops = nullptr) const;

  /// Writes column `index` of K into `grid`, which must be all zero on
  /// entry. Only samples inside the returned box can be nonzero, so the
  /// cost is proportional to the square of the generator's scale.
  SupportBox apply_to_basis(std::size_t index, std::span<double> grid) const;

 private:
  void check(std::span<const double> grid) const;

  int scales_;
  int side_;
  FractalCoefficients coefficients_;
};

}  // namespace frim
