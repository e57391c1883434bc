#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <vector>

#include "frim/errors.hpp"
#include "frim/fractal.hpp"
#include "frim/random.hpp"
#include "oracles.hpp"

using frim::FractalOperator;
using frim::StructureFunction;

namespace {

struct Parented {
  int x, y;
  std::vector<std::array<int, 2>> parents;
};

// Every refinement point of a (2^p + 1)^2 grid with its parents, from the
// mid-point geometry alone.
std::vector<Parented> refinement_points(int p) {
  const int n = (1 << p) + 1;
  std::vector<Parented> out;
  for (int s = 1 << p; s >= 2; s /= 2) {
    const int h = s / 2;
    for (int y = h; y < n; y += s) {
      for (int x = h; x < n; x += s) out.push_back({x, y, {{x - h, y - h}, {x + h, y - h}, {x + h, y + h}, {x - h, y + h}}});
    }
    for (int y = 0; y < n; y += h) {
      for (int x = 0; x < n; x += h) {
        const bool xm = x % s == h, ym = y % s == h;
        if (xm == ym) continue;
        Parented pt{x, y, {}};
        if (xm) {
          pt.parents = {{x - h, y}, {x + h, y}};
          if (y - h >= 0) pt.parents.push_back({x, y - h});
          if (y + h < n) pt.parents.push_back({x, y + h});
        } else {
          pt.parents = {{x, y - h}, {x, y + h}};
          if (x - h >= 0) pt.parents.push_back({x - h, y});
          if (x + h < n) pt.parents.push_back({x + h, y});
        }
        out.push_back(pt);
      }
    }
  }
  return out;
}

double cov(const StructureFunction& sf, double r) { return sf.covariance(r); }

}  // namespace

TEST(Coefficients, ClosedFormsMatchNumericSolveAtEveryScale) {
  const int p = 8;
  const auto sf = StructureFunction::kolmogorov(1.0, (1 << p));
  const auto coeffs = frim::build_coefficients(sf, p);
  ASSERT_EQ(coeffs.levels.size(), static_cast<std::size_t>(p));
  const double s2 = std::sqrt(2.0);
  for (const auto& level : coeffs.levels) {
    const double r = level.step;
    const double c0 = cov(sf, 0), c1 = cov(sf, r / 2), c2 = cov(sf, r / s2), c3 = cov(sf, r), c4 = cov(sf, s2 * r);

    const std::vector<double> square_c{c0, c3, c4, c3, c3, c0, c3, c4, c4, c3, c0, c3, c3, c4, c3, c0};
    const auto sq = frim::solve_coefficients_numeric(square_c, std::vector<double>(4, c2), sf.variance());
    for (double w : sq.weights) EXPECT_NEAR(level.square.side, w, 1e-10) << "step " << r;
    EXPECT_NEAR(level.square.gain, sq.gain, 1e-10 * std::max(1.0, sq.gain));

    const std::vector<double> tri_c{c0, c3, c2, c3, c0, c2, c2, c2, c0};
    const auto tri = frim::solve_coefficients_numeric(tri_c, std::vector<double>(3, c1), sf.variance());
    EXPECT_NEAR(level.triangle.edge, tri.weights[0], 1e-10);
    EXPECT_NEAR(level.triangle.edge, tri.weights[1], 1e-10);
    EXPECT_NEAR(level.triangle.interior, tri.weights[2], 1e-10);
    EXPECT_NEAR(level.triangle.gain, tri.gain, 1e-10 * std::max(1.0, tri.gain));

    // Cyclic order endpoint, centre, endpoint, centre.
    const std::vector<double> dia_c{c0, c2, c3, c2, c2, c0, c2, c3, c3, c2, c0, c2, c2, c3, c2, c0};
    const auto dia = frim::solve_coefficients_numeric(dia_c, std::vector<double>(4, c1), sf.variance());
    for (double w : dia.weights) EXPECT_NEAR(level.diamond.side, w, 1e-10);
    EXPECT_NEAR(level.diamond.gain, dia.gain, 1e-10 * std::max(1.0, dia.gain));
  }
}

TEST(Coefficients, TriangleSatisfiesItsSystemBySubstitution) {
  const auto sf = StructureFunction::kolmogorov(1.0, 64);
  const auto coeffs = frim::build_coefficients(sf, 6);
  for (const auto& level : coeffs.levels) {
    const double r = level.step;
    const double c0 = cov(sf, 0), c1 = cov(sf, r / 2), c2 = cov(sf, r / std::sqrt(2.0)), c3 = cov(sf, r);
    const auto& t = level.triangle;
    EXPECT_NEAR(c0 * t.edge + c3 * t.edge + c2 * t.interior, c1, 1e-10 * std::abs(c1));
    EXPECT_NEAR(c2 * t.edge + c2 * t.edge + c0 * t.interior, c1, 1e-10 * std::abs(c1));
  }
}

TEST(Coefficients, NumericSolverUncorrelatedParents) {
  const double s2 = 2.5;
  std::vector<double> c(16, 0.0);
  for (int i = 0; i < 4; ++i) c[static_cast<std::size_t>(5 * i)] = s2;
  const auto out = frim::solve_coefficients_numeric(c, std::vector<double>(4, 0.0), s2);
  for (double w : out.weights) EXPECT_EQ(w, 0.0);
  EXPECT_NEAR(out.gain, std::sqrt(s2), 1e-15);
}

TEST(Coefficients, NumericSolverReportsNegativeRadicand) {
  // Perfectly predictable point whose prior variance is too small.
  const std::vector<double> c{1.0};
  try {
    frim::solve_coefficients_numeric(c, std::vector<double>{1.0}, 0.5);
    FAIL() << "expected RadicandError";
  } catch (const frim::RadicandError& e) {
    EXPECT_NEAR(e.radicand(), -0.5, 1e-15);
  }
}

TEST(Coefficients, NumericSolverRejectsSingularSystem) {
  const std::vector<double> c{1.0, 1.0, 1.0, 1.0};
  EXPECT_THROW(frim::solve_coefficients_numeric(c, std::vector<double>{0.5, 0.5}, 1.0), frim::ConstructionError);
}

TEST(Coefficients, FlatStructureFunctionHasZeroGain) {
  const auto square = frim::square_closed_form(1.0, 0.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(square.side, 0.25);
  EXPECT_NEAR(square.gain_squared, 0.0, 1e-15);
  const auto flat = StructureFunction::custom([](double) { return 0.0; }, 1.0);
  EXPECT_THROW(frim::build_coefficients(flat, 3), frim::ConstructionError);
}

TEST(OuterOperator, FactorsCornerCovariance) {
  const double d = 16;
  const auto sf = StructureFunction::kolmogorov(1.0, d);
  const auto outer = frim::build_coefficients(sf, 4).outer;
  const double f1 = sf.evaluate(d), f2 = sf.evaluate(std::sqrt(2.0) * d), s2 = sf.variance();
  EXPECT_NEAR(outer.a * outer.a, 4 * s2 - f1 - f2 / 2, 1e-10 * s2);
  EXPECT_NEAR(outer.b * outer.b, f1 - f2 / 2, 1e-10 * s2);
  EXPECT_NEAR(outer.c * outer.c, f2, 1e-10 * s2);

  const double c0 = s2, c1 = s2 - f1 / 2, c2 = s2 - f2 / 2;
  const double expected[4][4] = {{c0, c1, c2, c1}, {c1, c0, c1, c2}, {c2, c1, c0, c1}, {c1, c2, c1, c0}};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double kk = 0.0, ki = 0.0;
      for (int m = 0; m < 4; ++m) {
        kk += outer.forward[i][m] * outer.forward[j][m];
        ki += outer.forward[i][m] * outer.inverse[m][j];
      }
      EXPECT_NEAR(kk, expected[i][j], 1e-12 * s2);
      EXPECT_NEAR(ki, i == j ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(OuterOperator, FirstGeneratorIsPiston) {
  const auto k = oracle::kolmogorov(3);
  std::vector<double> u(k.size(), 0.0);
  u[0] = 1.0;
  k.apply(u);
  const int n = k.side();
  const double half_a = k.outer().a / 2;
  for (std::size_t idx : {std::size_t{0}, std::size_t(n - 1), std::size_t(n * n - 1), std::size_t(n * (n - 1))}) {
    EXPECT_NEAR(u[idx], half_a, 1e-12 * half_a);
  }
}

TEST(FractalOperator, RoundTripsAndAdjoints) {
  for (int p = 1; p <= 5; ++p) {
    const auto k = oracle::kolmogorov(p);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = oracle::random_vector(k.size(), frim::derive_seed(11, trial, p));
      const auto y = oracle::random_vector(k.size(), frim::derive_seed(12, trial, p));

      auto v = x;
      k.apply(v);
      k.apply_inverse(v);
      for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(v[i], x[i], 1e-9 * oracle::max_abs(x));
      v = x;
      k.apply_transpose(v);
      k.apply_inverse_transpose(v);
      for (std::size_t i = 0; i < v.size(); ++i) ASSERT_NEAR(v[i], x[i], 1e-9 * oracle::max_abs(x));

      auto kx = x, kty = y;
      k.apply(kx);
      k.apply_transpose(kty);
      const double lhs = oracle::dot(kx, y), rhs = oracle::dot(x, kty);
      EXPECT_NEAR(lhs, rhs, 1e-12 * oracle::norm(kx) * oracle::norm(y)) << "p=" << p;

      auto kix = x, kity = y;
      k.apply_inverse(kix);
      k.apply_inverse_transpose(kity);
      EXPECT_NEAR(oracle::dot(kix, y), oracle::dot(x, kity), 1e-12 * oracle::norm(kix) * oracle::norm(y));

      // w^T K^-T K^-1 w = ||K^-1 w||^2
      auto q = kix;
      k.apply_inverse_transpose(q);
      EXPECT_NEAR(oracle::dot(x, q), oracle::dot(kix, kix), 1e-10 * oracle::dot(kix, kix));
    }
  }
}

TEST(FractalOperator, ZeroMapsToZero) {
  const auto k = oracle::kolmogorov(3);
  std::vector<double> v(k.size(), 0.0);
  k.apply_transpose(v);
  k.apply_inverse_transpose(v);
  for (double x : v) EXPECT_EQ(x, 0.0);
}

TEST(FractalOperator, TransposeIsDenseTranspose) {
  const auto k = oracle::kolmogorov(2);
  const auto kd = oracle::dense_k(k);
  const auto kt = oracle::assemble(k.size(), [&](std::span<double> v) { k.apply_transpose(v); });
  const auto ki = oracle::assemble(k.size(), [&](std::span<double> v) { k.apply_inverse(v); });
  const auto kit = oracle::assemble(k.size(), [&](std::span<double> v) { k.apply_inverse_transpose(v); });
  const double scale = kd.cwiseAbs().maxCoeff();
  EXPECT_LE((kt - kd.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale);
  EXPECT_LE((ki * kd - oracle::Matrix::Identity(25, 25)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((kit - ki.transpose()).cwiseAbs().maxCoeff(), 1e-12 * ki.cwiseAbs().maxCoeff());
}

TEST(FractalOperator, InverseOfConstantGridByHand) {
  // 3x3 grid: corners go through the outer inverse, the centre and the four
  // boundary midpoints through one refinement level.
  const double d = 2.0;
  const auto sf = StructureFunction::kolmogorov(1.0, d);
  const FractalOperator k(sf, 1);
  std::vector<double> w(9, 1.0);
  k.apply_inverse(w);

  const double s = std::sqrt(2.0);
  const double f1 = sf.evaluate(d), f2 = sf.evaluate(s * d);
  const double a = std::sqrt(4 * sf.variance() - f1 - f2 / 2);
  EXPECT_NEAR(w[0], 2.0 / a, 1e-12);
  EXPECT_NEAR(w[2], 0.0, 1e-12);
  EXPECT_NEAR(w[8], 0.0, 1e-12);
  EXPECT_NEAR(w[6], 0.0, 1e-12);

  const double r = 2.0;
  const double c0 = cov(sf, 0), c1 = cov(sf, r / 2), c2 = cov(sf, r / s), c3 = cov(sf, r), c4 = cov(sf, s * r);
  const double side = c2 / (c0 + 2 * c3 + c4);
  const double centre_gain = std::sqrt(c0 - 4 * c2 * c2 / (c0 + 2 * c3 + c4));
  EXPECT_NEAR(w[4], (1.0 - 4 * side) / centre_gain, 1e-12);

  const double det = c0 * (c0 + c3) - 2 * c2 * c2;
  const double edge = c1 * (c0 - c2) / det;
  const double interior = c1 * (c0 - 2 * c2 + c3) / det;
  const double edge_gain = std::sqrt(c0 - c1 * c1 * (3 * c0 - 4 * c2 + c3) / det);
  const double expected_edge = (1.0 - 2 * edge - interior) / edge_gain;
  for (std::size_t idx : {1, 3, 5, 7}) EXPECT_NEAR(w[idx], expected_edge, 1e-12);
  // The weights do not sum to one, so a constant is not reproduced by
  // interpolation alone.
  EXPECT_GT(std::abs(expected_edge), 1e-3);
}

// Moments of each new point propagated from parents that follow the model
// covariance exactly.
TEST(FractalOperator, RefinementPreservesModelMoments) {
  const int p = 4;
  const int n = (1 << p) + 1;
  const auto sf = frim::StructureFunction::kolmogorov(1.0, n - 1);
  const auto k = oracle::kolmogorov(p);
  const double s2 = sf.variance();
  for (const auto& pt : refinement_points(p)) {
    const int step = [&] {
      int s = 2;
      while ((pt.x % s == 0) && (pt.y % s == 0)) s *= 2;
      return s;
    }();
    const auto& level = k.levels()[static_cast<std::size_t>(p) - static_cast<std::size_t>(std::log2(step))];
    ASSERT_EQ(level.step, step);
    double gain = 0.0;
    std::vector<double> alpha;
    if (pt.parents.size() == 4 && (pt.x % step) == step / 2 && (pt.y % step) == step / 2) {
      gain = level.square.gain;
      alpha.assign(4, level.square.side);
    } else if (pt.parents.size() == 4) {
      gain = level.diamond.gain;
      alpha.assign(4, level.diamond.side);
    } else {
      gain = level.triangle.gain;
      alpha = {level.triangle.edge, level.triangle.edge, level.triangle.interior};
    }
    const auto model = [&](std::array<int, 2> a, std::array<int, 2> b) {
      return sf.covariance(std::hypot(a[0] - b[0], a[1] - b[1]));
    };
    double var = gain * gain;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      for (std::size_t j = 0; j < alpha.size(); ++j) var += alpha[i] * alpha[j] * model(pt.parents[i], pt.parents[j]);
    }
    EXPECT_NEAR(var, s2, 1e-10 * s2) << "(" << pt.x << "," << pt.y << ")";
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      double cross = 0.0;
      for (std::size_t j = 0; j < alpha.size(); ++j) cross += alpha[j] * model(pt.parents[j], pt.parents[i]);
      const double d = var + s2 - 2 * cross;
      const double expected = sf.evaluate(std::hypot(pt.x - pt.parents[i][0], pt.y - pt.parents[i][1]));
      EXPECT_NEAR(d, expected, 1e-10 * s2) << "(" << pt.x << "," << pt.y << ") parent " << i;
    }
  }
}

// The first refinement level has the exact corner covariance as parents, so
// the assembled K K^T reproduces the law there to rounding. Finer levels
// inherit the small mismatch of their parents.
TEST(FractalOperator, AssembledCovarianceExactOnFirstLevel) {
  for (int p : {2, 3}) {
    const int n = (1 << p) + 1;
    const auto k = oracle::kolmogorov(p);
    const auto sf = frim::StructureFunction::kolmogorov(1.0, n - 1);
    const auto kd = oracle::dense_k(k);
    const oracle::Matrix c = kd * kd.transpose();
    double worst_fine = 0.0;
    for (const auto& pt : refinement_points(p)) {
      const Eigen::Index i = pt.y * n + pt.x;
      const bool first_level = pt.x % (n / 2) == 0 && pt.y % (n / 2) == 0;
      if (first_level) EXPECT_NEAR(c(i, i), sf.variance(), 1e-10 * sf.variance());
      for (const auto& [px, py] : pt.parents) {
        const Eigen::Index j = py * n + px;
        const double d = c(i, i) + c(j, j) - 2 * c(i, j);
        const double expected = sf.evaluate(std::hypot(pt.x - px, pt.y - py));
        if (first_level) {
          EXPECT_NEAR(d, expected, 1e-10 * sf.variance()) << "(" << pt.x << "," << pt.y << ")";
        } else {
          worst_fine = std::max(worst_fine, std::abs(d - expected) / expected);
        }
      }
    }
    EXPECT_LT(worst_fine, 0.10) << "p=" << p;
  }
}

TEST(FractalOperator, MonteCarloCovarianceApproachesKKt) {
  const auto k = oracle::kolmogorov(2);
  const auto kd = oracle::dense_k(k);
  const oracle::Matrix c = kd * kd.transpose();
  const int samples = 100000;
  std::vector<double> sum(k.size(), 0.0), sum2(k.size(), 0.0);
  frim::NormalRng rng(2024);
  std::vector<double> u(k.size());
  for (int s = 0; s < samples; ++s) {
    rng.fill(u);
    k.apply(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
      sum[i] += u[i];
      sum2[i] += u[i] * u[i];
    }
  }
  for (std::size_t i = 0; i < k.size(); ++i) {
    const double mean = sum[i] / samples;
    const double var = sum2[i] / samples - mean * mean;
    const double expected = c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    const double se = expected * std::sqrt(2.0 / (samples - 1));
    EXPECT_NEAR(var, expected, 3 * se) << "sample " << i;
  }
}

TEST(FractalOperator, FlopCountIsSixNMinusFourteen) {
  for (int p = 1; p <= 8; ++p) {
    const auto k = oracle::kolmogorov(p);
    const std::uint64_t expected = 6 * k.size() - 14;
    std::vector<double> v(k.size(), 1.0);
    frim::FlopCounter c1, c2, c3, c4;
    k.apply(v, &c1);
    k.apply_inverse(v, &c2);
    k.apply_transpose(v, &c3);
    k.apply_inverse_transpose(v, &c4);
    EXPECT_EQ(c1.fractal, expected);
    EXPECT_EQ(c2.fractal, expected);
    EXPECT_EQ(c3.fractal, expected);
    EXPECT_EQ(c4.fractal, expected);
    EXPECT_EQ(c1.total(), c1.fractal);
  }
  const auto k = oracle::kolmogorov(2);
  std::vector<double> v(25, 0.0);
  frim::FlopCounter c;
  k.apply(v, &c);
  EXPECT_EQ(c.total(), 136u);
}

TEST(FractalOperator, BasisColumnsStayInsideSupportBox) {
  const auto k = oracle::kolmogorov(4);
  const auto kd = oracle::dense_k(k);
  const int n = k.side();
  std::vector<double> grid(k.size(), 0.0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    std::fill(grid.begin(), grid.end(), 0.0);
    const auto box = k.apply_to_basis(i, grid);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const auto idx = static_cast<std::size_t>(y * n + x);
        const double expected = kd(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(i));
        ASSERT_NEAR(grid[idx], expected, 1e-12 * std::max(1.0, std::abs(expected))) << "column " << i;
        if (x < box.x0 || x > box.x1 || y < box.y0 || y > box.y1) ASSERT_EQ(expected, 0.0) << "column " << i;
      }
    }
  }
}

TEST(FractalOperator, RejectsWrongGridSize) {
  const auto k = oracle::kolmogorov(3);
  std::vector<double> v(80);
  EXPECT_THROW(k.apply(v), frim::ShapeError);
  EXPECT_THROW(k.apply_inverse(v), frim::ShapeError);
  EXPECT_THROW(k.apply_transpose(v), frim::ShapeError);
  EXPECT_THROW(k.apply_inverse_transpose(v), frim::ShapeError);
}
