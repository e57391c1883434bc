#include "frim/fractal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>

namespace frim {

namespace {

constexpr std::uint64_t kFlopsPerPoint = 6;
constexpr std::uint64_t kFlopsOuter = 10;

// Visits the cell centres created when refining spacing `step`, restricted
// to `box`. Parents are the four cell corners.
template <class F>
void for_each_centre(int n, int step, const SupportBox& box, F&& f) {
  const int h = step / 2;
  auto first = [&](int lo) { return lo <= h ? h : h + ((lo - h + step - 1) / step) * step; };
  for (int y = first(box.y0); y <= box.y1 && y < n; y += step) {
    const std::size_t row = static_cast<std::size_t>(y) * n;
    const std::size_t below = static_cast<std::size_t>(y - h) * n;
    const std::size_t above = static_cast<std::size_t>(y + h) * n;
    for (int x = first(box.x0); x <= box.x1 && x < n; x += step) {
      f(row + x, below + (x - h), below + (x + h), above + (x + h), above + (x - h));
    }
  }
}

// Visits the edge midpoints created when refining spacing `step`.
// Boundary midpoints get (endpoint, endpoint, centre) via `triangle`;
// interior ones get (endpoint, endpoint, centre, centre) via `diamond`.
template <class T, class D>
void for_each_edge(int n, int step, const SupportBox& box, T&& triangle, D&& diamond) {
  const int h = step / 2;
  const int last = n - 1;
  auto first_odd = [&](int lo) { return lo <= h ? h : h + ((lo - h + step - 1) / step) * step; };
  auto first_even = [&](int lo) { return lo <= 0 ? 0 : ((lo + step - 1) / step) * step; };
  auto at = [n](int x, int y) { return static_cast<std::size_t>(y) * n + static_cast<std::size_t>(x); };

  // Horizontal edges: x = h mod step, y = 0 mod step.
  for (int y = first_even(box.y0); y <= box.y1 && y < n; y += step) {
    for (int x = first_odd(box.x0); x <= box.x1 && x < n; x += step) {
      const std::size_t self = at(x, y);
      const std::size_t left = at(x - h, y);
      const std::size_t right = at(x + h, y);
      if (y == 0) {
        triangle(self, left, right, at(x, y + h));
      } else if (y == last) {
        triangle(self, left, right, at(x, y - h));
      } else {
        diamond(self, left, right, at(x, y - h), at(x, y + h));
      }
    }
  }
  // Vertical edges: x = 0 mod step, y = h mod step.
  for (int y = first_odd(box.y0); y <= box.y1 && y < n; y += step) {
    for (int x = first_even(box.x0); x <= box.x1 && x < n; x += step) {
      const std::size_t self = at(x, y);
      const std::size_t down = at(x, y - h);
      const std::size_t up = at(x, y + h);
      if (x == 0) {
        triangle(self, down, up, at(x + h, y));
      } else if (x == last) {
        triangle(self, down, up, at(x - h, y));
      } else {
        diamond(self, down, up, at(x - h, y), at(x + h, y));
      }
    }
  }
}

double gain_or_throw(double gain_squared, const char* stencil, int step) {
  if (!(gain_squared > 0.0) || !std::isfinite(gain_squared)) {
    std::ostringstream os;
    os << stencil << " gain squared is " << gain_squared << " at step " << step
       << "; the structure function or variance policy is invalid";
    throw ConstructionError(os.str());
  }
  return std::sqrt(gain_squared);
}

OuterOperator build_outer(const StructureFunction& sf, int side) {
  const double extent = side - 1;
  const double sigma2 = sf.variance();
  const double f_side = sf.evaluate(extent);
  const double f_diag = sf.evaluate(std::numbers::sqrt2 * extent);
  const double a2 = 4.0 * sigma2 - f_side - 0.5 * f_diag;
  const double b2 = f_side - 0.5 * f_diag;
  const double c2 = f_diag;
  if (!(a2 > 0.0) || !(b2 > 0.0) || !(c2 > 0.0)) {
    std::ostringstream os;
    os << "outer covariance is not positive definite (piston " << a2 << ", waffle " << b2
       << ", tip/tilt " << 0.5 * c2 << ")";
    throw ConstructionError(os.str());
  }
  OuterOperator out;
  out.a = std::sqrt(a2);
  out.b = std::sqrt(b2);
  out.c = std::sqrt(c2);
  const double a = out.a, b = out.b, c = out.c;
  out.forward = {{{0.5 * a, -0.5 * b, -0.5 * c, 0.0},
                  {0.5 * a, 0.5 * b, 0.0, -0.5 * c},
                  {0.5 * a, -0.5 * b, 0.5 * c, 0.0},
                  {0.5 * a, 0.5 * b, 0.0, 0.5 * c}}};
  out.inverse = {{{0.5 / a, 0.5 / a, 0.5 / a, 0.5 / a},
                  {-0.5 / b, 0.5 / b, -0.5 / b, 0.5 / b},
                  {-1.0 / c, 0.0, 1.0 / c, 0.0},
                  {0.0, -1.0 / c, 0.0, 1.0 / c}}};
  const std::size_t n = static_cast<std::size_t>(side);
  const std::size_t last = n - 1;
  out.corners = {0, last, last * n + last, last * n};
  return out;
}

}  // namespace

ClosedForm4 square_closed_form(double c0, double g2, double g3, double g4) {
  const double den = 4.0 * c0 - 2.0 * g3 - g4;
  return {(c0 - g2) / den, (c0 * (8.0 * g2 - 2.0 * g3 - g4) - 4.0 * g2 * g2) / den};
}

ClosedForm3 triangle_closed_form(double c0, double g1, double g2, double g3) {
  const double k = 4.0 * g2 - g3;
  const double det = c0 * k - 2.0 * g2 * g2;
  const double c1 = c0 - g1;
  return {c1 * g2 / det, c1 * (2.0 * g2 - g3) / det, (c0 * (2.0 * g1 * k - 2.0 * g2 * g2) - g1 * g1 * k) / det};
}

ClosedForm4 diamond_closed_form(double c0, double g1, double g2, double g3) {
  return square_closed_form(c0, g1, g2, g3);
}

namespace {

// Gaussian elimination with partial pivoting on an m x m row-major matrix,
// for several right-hand sides at once. Returns false when singular.
bool gauss_solve(std::vector<double> a, std::size_t m, std::vector<std::vector<double>*> rhs) {
  double scale = 0.0;
  for (double v : a) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < m; ++i) {
      if (std::abs(a[i * m + k]) > std::abs(a[pivot * m + k])) pivot = i;
    }
    if (!(std::abs(a[pivot * m + k]) > 1e-14 * scale)) return false;
    if (pivot != k) {
      for (std::size_t j = 0; j < m; ++j) std::swap(a[k * m + j], a[pivot * m + j]);
      for (auto* x : rhs) std::swap((*x)[k], (*x)[pivot]);
    }
    for (std::size_t i = k + 1; i < m; ++i) {
      const double factor = a[i * m + k] / a[k * m + k];
      for (std::size_t j = k; j < m; ++j) a[i * m + j] -= factor * a[k * m + j];
      for (auto* x : rhs) (*x)[i] -= factor * (*x)[k];
    }
  }
  for (auto* x : rhs) {
    for (std::size_t k = m; k-- > 0;) {
      double acc = (*x)[k];
      for (std::size_t j = k + 1; j < m; ++j) acc -= a[k * m + j] * (*x)[j];
      (*x)[k] = acc / a[k * m + k];
    }
  }
  return true;
}

}  // namespace

NumericCoefficients solve_coefficients_numeric(std::span<const double> parent_cov,
                                               std::span<const double> cross_cov, double sigma2) {
  const std::size_t m = cross_cov.size();
  if (parent_cov.size() != m * m) throw ShapeError("parent covariance must be m x m with m = cross_cov.size()");

  // Covariances are sigma2 minus a small structure term. Writing C = sigma2 11^T - G
  // and solving with G keeps the large common part out of the elimination.
  std::vector<double> g_mat(m * m), a(m), b(m, 1.0);
  for (std::size_t i = 0; i < m * m; ++i) g_mat[i] = sigma2 - parent_cov[i];
  for (std::size_t i = 0; i < m; ++i) a[i] = sigma2 - cross_cov[i];
  const std::vector<double> g(a);

  std::vector<double> x;
  double radicand = 0.0;
  bool shifted = gauss_solve(g_mat, m, {&a, &b});
  if (shifted) {
    double sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sum_a += a[i];
      sum_b += b[i];
    }
    const double den = 1.0 - sigma2 * sum_b;
    shifted = std::abs(den) > 1e-12;
    if (shifted) {
      const double tau = sigma2 * (1.0 - sum_a) / den;
      x.resize(m);
      radicand = tau;
      for (std::size_t i = 0; i < m; ++i) {
        x[i] = a[i] - tau * b[i];
        radicand += g[i] * x[i];
      }
    }
  }
  if (!shifted) {
    x.assign(cross_cov.begin(), cross_cov.end());
    if (!gauss_solve(std::vector<double>(parent_cov.begin(), parent_cov.end()), m, {&x})) {
      throw ConstructionError("parent covariance is singular");
    }
    radicand = sigma2;
    for (std::size_t j = 0; j < m; ++j) radicand -= cross_cov[j] * x[j];
  }
  if (radicand < 0.0) {
    std::ostringstream os;
    os << "gain radicand is negative: " << radicand;
    throw RadicandError(os.str(), radicand);
  }
  return {std::move(x), std::sqrt(radicand)};
}

FractalCoefficients build_coefficients(const StructureFunction& sf, int scales) {
  const int side = PhaseGrid::side_for(scales);
  FractalCoefficients out;
  out.outer = build_outer(sf, side);
  for (int step = side - 1; step >= 2; step /= 2) {
    const double r = step;
    const double c0 = sf.variance();
    const double g1 = 0.5 * sf.evaluate(0.5 * r);
    const double g2 = 0.5 * sf.evaluate(r / std::numbers::sqrt2);
    const double g3 = 0.5 * sf.evaluate(r);
    const double g4 = 0.5 * sf.evaluate(std::numbers::sqrt2 * r);

    ScaleCoefficients level;
    level.step = step;
    const ClosedForm4 sq = square_closed_form(c0, g2, g3, g4);
    level.square = {gain_or_throw(sq.gain_squared, "square", step), sq.side};
    const ClosedForm3 tr = triangle_closed_form(c0, g1, g2, g3);
    level.triangle = {gain_or_throw(tr.gain_squared, "triangle", step), tr.edge, tr.interior};
    const ClosedForm4 di = diamond_closed_form(c0, g1, g2, g3);
    level.diamond = {gain_or_throw(di.gain_squared, "diamond", step), di.side};
    out.levels.push_back(level);
  }
  return out;
}

FractalOperator::FractalOperator(const StructureFunction& sf, int scales)
    : FractalOperator(build_coefficients(sf, scales), scales) {}

FractalOperator::FractalOperator(FractalCoefficients coefficients, int scales)
    : scales_(scales), side_(PhaseGrid::side_for(scales)), coefficients_(std::move(coefficients)) {
  if (coefficients_.levels.size() != static_cast<std::size_t>(scales)) {
    throw ShapeError("coefficient table does not match the scale count");
  }
}

void FractalOperator::check(std::span<const double> grid) const {
  if (grid.size() != size()) {
    throw ShapeError("grid has " + std::to_string(grid.size()) + " samples, operator expects " +
                     std::to_string(size()));
  }
}

void FractalOperator::apply(PhaseGrid& grid, FlopCounter* flops) const {
  if (grid.side() != side_) throw ShapeError("grid side does not match the operator");
  apply(grid.values(), flops);
}
void FractalOperator::apply_inverse(PhaseGrid& grid, FlopCounter* flops) const {
  if (grid.side() != side_) throw ShapeError("grid side does not match the operator");
  apply_inverse(grid.values(), flops);
}
void FractalOperator::apply_transpose(PhaseGrid& grid, FlopCounter* flops) const {
  if (grid.side() != side_) throw ShapeError("grid side does not match the operator");
  apply_transpose(grid.values(), flops);
}
void FractalOperator::apply_inverse_transpose(PhaseGrid& grid, FlopCounter* flops) const {
  if (grid.side() != side_) throw ShapeError("grid side does not match the operator");
  apply_inverse_transpose(grid.values(), flops);
}

namespace {

// Per-point kernels. Each costs exactly kFlopsPerPoint after factoring the
// equal weights.

struct Forward {
  static void four(double* z, const FourParentWeights& w, std::size_t s, std::size_t p0, std::size_t p1,
                   std::size_t p2, std::size_t p3) {
    z[s] = w.gain * z[s] + w.side * (z[p0] + z[p1] + z[p2] + z[p3]);
  }
  static void three(double* z, const TriangleWeights& w, std::size_t s, std::size_t e0, std::size_t e1,
                    std::size_t c) {
    z[s] = w.gain * z[s] + w.edge * (z[e0] + z[e1]) + w.interior * z[c];
  }
};

struct Inverse {
  static void four(double* z, const FourParentWeights& w, std::size_t s, std::size_t p0, std::size_t p1,
                   std::size_t p2, std::size_t p3) {
    z[s] = (z[s] - w.side * (z[p0] + z[p1] + z[p2] + z[p3])) / w.gain;
  }
  static void three(double* z, const TriangleWeights& w, std::size_t s, std::size_t e0, std::size_t e1,
                    std::size_t c) {
    z[s] = (z[s] - w.edge * (z[e0] + z[e1]) - w.interior * z[c]) / w.gain;
  }
};

struct Transpose {
  static void four(double* z, const FourParentWeights& w, std::size_t s, std::size_t p0, std::size_t p1,
                   std::size_t p2, std::size_t p3) {
    const double t = w.side * z[s];
    z[p0] += t;
    z[p1] += t;
    z[p2] += t;
    z[p3] += t;
    z[s] *= w.gain;
  }
  static void three(double* z, const TriangleWeights& w, std::size_t s, std::size_t e0, std::size_t e1,
                    std::size_t c) {
    const double t = w.edge * z[s];
    z[e0] += t;
    z[e1] += t;
    z[c] += w.interior * z[s];
    z[s] *= w.gain;
  }
};

struct InverseTranspose {
  static void four(double* z, const FourParentWeights& w, std::size_t s, std::size_t p0, std::size_t p1,
                   std::size_t p2, std::size_t p3) {
    z[s] /= w.gain;
    const double t = w.side * z[s];
    z[p0] -= t;
    z[p1] -= t;
    z[p2] -= t;
    z[p3] -= t;
  }
  static void three(double* z, const TriangleWeights& w, std::size_t s, std::size_t e0, std::size_t e1,
                    std::size_t c) {
    z[s] /= w.gain;
    const double t = w.edge * z[s];
    z[e0] -= t;
    z[e1] -= t;
    z[c] -= w.interior * z[s];
  }
};

template <class Kernel>
void centres(double* z, int n, const ScaleCoefficients& level, const SupportBox& box) {
  for_each_centre(n, level.step, box, [&](std::size_t s, std::size_t p0, std::size_t p1, std::size_t p2,
                                          std::size_t p3) { Kernel::four(z, level.square, s, p0, p1, p2, p3); });
}

template <class Kernel>
void edges(double* z, int n, const ScaleCoefficients& level, const SupportBox& box) {
  for_each_edge(
      n, level.step, box,
      [&](std::size_t s, std::size_t e0, std::size_t e1, std::size_t c) {
        Kernel::three(z, level.triangle, s, e0, e1, c);
      },
      [&](std::size_t s, std::size_t e0, std::size_t e1, std::size_t c0, std::size_t c1) {
        Kernel::four(z, level.diamond, s, e0, e1, c0, c1);
      });
}

void outer_forward(double* z, const OuterOperator& k) {
  const auto [i1, i2, i3, i4] = k.corners;
  const double a = (0.5 * k.a) * z[i1];
  const double b = (0.5 * k.b) * z[i2];
  const double c = (0.5 * k.c) * z[i3];
  const double d = (0.5 * k.c) * z[i4];
  const double s = a - b;
  const double t = a + b;
  z[i1] = s - c;
  z[i2] = t - d;
  z[i3] = s + c;
  z[i4] = t + d;
}

void outer_inverse(double* z, const OuterOperator& k) {
  const auto [i1, i2, i3, i4] = k.corners;
  const double s13 = z[i1] + z[i3];
  const double s24 = z[i2] + z[i4];
  const double u3 = (z[i3] - z[i1]) / k.c;
  const double u4 = (z[i4] - z[i2]) / k.c;
  z[i1] = (s13 + s24) / (2.0 * k.a);
  z[i2] = (s24 - s13) / (2.0 * k.b);
  z[i3] = u3;
  z[i4] = u4;
}

void outer_transpose(double* z, const OuterOperator& k) {
  const auto [i1, i2, i3, i4] = k.corners;
  const double s13 = z[i1] + z[i3];
  const double s24 = z[i2] + z[i4];
  const double v3 = (0.5 * k.c) * (z[i3] - z[i1]);
  const double v4 = (0.5 * k.c) * (z[i4] - z[i2]);
  z[i1] = (0.5 * k.a) * (s13 + s24);
  z[i2] = (0.5 * k.b) * (s24 - s13);
  z[i3] = v3;
  z[i4] = v4;
}

void outer_inverse_transpose(double* z, const OuterOperator& k) {
  const auto [i1, i2, i3, i4] = k.corners;
  const double a = z[i1] / (2.0 * k.a);
  const double b = z[i2] / (2.0 * k.b);
  const double c = z[i3] / k.c;
  const double d = z[i4] / k.c;
  const double s = a - b;
  const double t = a + b;
  z[i1] = s - c;
  z[i2] = t - d;
  z[i3] = s + c;
  z[i4] = t + d;
}

std::uint64_t operator_flops(std::size_t size) { return kFlopsPerPoint * (size - 4) + kFlopsOuter; }

}  // namespace

void FractalOperator::apply(std::span<double> grid, FlopCounter* flops) const {
  check(grid);
  double* z = grid.data();
  const SupportBox all{0, side_ - 1, 0, side_ - 1};
  outer_forward(z, outer());
  for (const auto& level : levels()) {
    centres<Forward>(z, side_, level, all);
    edges<Forward>(z, side_, level, all);
  }
  if (flops) flops->fractal += operator_flops(size());
}

void FractalOperator::apply_inverse(std::span<double> grid, FlopCounter* flops) const {
  check(grid);
  double* z = grid.data();
  const SupportBox all{0, side_ - 1, 0, side_ - 1};
  for (auto it = levels().rbegin(); it != levels().rend(); ++it) {
    edges<Inverse>(z, side_, *it, all);
    centres<Inverse>(z, side_, *it, all);
  }
  outer_inverse(z, outer());
  if (flops) flops->fractal += operator_flops(size());
}

void FractalOperator::apply_transpose(std::span<double> grid, FlopCounter* flops) const {
  check(grid);
  double* z = grid.data();
  const SupportBox all{0, side_ - 1, 0, side_ - 1};
  for (auto it = levels().rbegin(); it != levels().rend(); ++it) {
    edges<Transpose>(z, side_, *it, all);
    centres<Transpose>(z, side_, *it, all);
  }
  outer_transpose(z, outer());
  if (flops) flops->fractal += operator_flops(size());
}

void FractalOperator::apply_inverse_transpose(std::span<double> grid, FlopCounter* flops) const {
  check(grid);
  double* z = grid.data();
  const SupportBox all{0, side_ - 1, 0, side_ - 1};
  outer_inverse_transpose(z, outer());
  for (const auto& level : levels()) {
    centres<InverseTranspose>(z, side_, level, all);
    edges<InverseTranspose>(z, side_, level, all);
  }
  if (flops) flops->fractal += operator_flops(size());
}

SupportBox FractalOperator::apply_to_basis(std::size_t index, std::span<double> grid) const {
  check(grid);
  if (index >= size()) throw ShapeError("basis index out of range");
  double* z = grid.data();
  const int n = side_;
  const int x = static_cast<int>(index % static_cast<std::size_t>(n));
  const int y = static_cast<int>(index / static_cast<std::size_t>(n));
  const SupportBox all{0, n - 1, 0, n - 1};

  const auto& corners = outer().corners;
  if (std::find(corners.begin(), corners.end(), index) != corners.end()) {
    z[index] = 1.0;
    apply(grid);
    return all;
  }

  auto lowbit = [n](int v) { return v == 0 ? n : (v & -v); };
  const int hx = lowbit(x);
  const int hy = lowbit(y);
  const int h = std::min(hx, hy);
  const int step = 2 * h;
  const bool centre = hx == h && hy == h;
  std::size_t level_index = 0;
  while (levels()[level_index].step != step) ++level_index;
  const ScaleCoefficients& own = levels()[level_index];

  if (centre) {
    z[index] = own.square.gain;
  } else if (x == 0 || y == 0 || x == n - 1 || y == n - 1) {
    z[index] = own.triangle.gain;
  } else {
    z[index] = own.diamond.gain;
  }

  // Same-level edges sit h away; every finer level of half-width h' can
  // reach 2h' further, so descendants stay within 3h - 2 per axis.
  const int reach = 3 * h;
  const SupportBox box{std::max(0, x - reach), std::min(n - 1, x + reach), std::max(0, y - reach),
                       std::min(n - 1, y + reach)};
  if (centre) edges<Forward>(z, n, own, box);
  for (std::size_t j = level_index + 1; j < levels().size(); ++j) {
    centres<Forward>(z, n, levels()[j], box);
    edges<Forward>(z, n, levels()[j], box);
  }
  return box;
}

}  // namespace frim
