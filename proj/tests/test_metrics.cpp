#include <gtest/gtest.h>

#include <cmath>

#include "frim/errors.hpp"
#include "frim/metrics.hpp"
#include "frim/random.hpp"
#include "oracles.hpp"

using frim::PhaseGrid;
using frim::Pupil;

TEST(Residual, ZeroForExactAndPiston) {
  const Pupil pupil = Pupil::annular(33);
  PhaseGrid truth(5);
  frim::NormalRng(1).fill(truth.values());
  auto stats = frim::residual_stats(truth, truth, pupil);
  EXPECT_EQ(stats.rms, 0.0);
  EXPECT_EQ(stats.variance, 0.0);
  PhaseGrid shifted = truth;
  for (double& v : shifted.values()) v += 4.5;
  stats = frim::residual_stats(shifted, truth, pupil);
  EXPECT_NEAR(stats.variance, 0.0, 1e-24);
}

TEST(Residual, AlternatingUnitField) {
  // +-1 checkerboard over the mask of a pupil whose samples split evenly.
  std::vector<bool> cells(4 * 4, false);
  cells[0] = cells[2] = true;  // cells (0,0) and (2,0): 8 samples, 4 of each sign
  const Pupil pupil = Pupil::from_cell_mask(5, cells);
  PhaseGrid truth(2), est(2);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) est(x, y) = (x + y) % 2 == 0 ? 1.0 : -1.0;
  }
  const auto stats = frim::residual_stats(est, truth, pupil);
  EXPECT_NEAR(stats.variance, 1.0, 1e-15);
  EXPECT_NEAR(stats.rms, 1.0, 1e-15);
}

TEST(Residual, InvariantUnderCommonOffset) {
  const Pupil pupil = Pupil::annular(17);
  PhaseGrid a(4), b(4);
  frim::NormalRng(2).fill(a.values());
  frim::NormalRng(3).fill(b.values());
  const auto base = frim::residual_stats(a, b, pupil);
  for (double c : {-3.0, 0.5, 100.0}) {
    PhaseGrid a2 = a, b2 = b;
    for (double& v : a2.values()) v += c;
    for (double& v : b2.values()) v += c;
    EXPECT_NEAR(frim::residual_stats(a2, b2, pupil).variance, base.variance, 1e-12 * base.variance);
    EXPECT_NEAR(frim::residual_stats(a2, b, pupil).variance, base.variance, 1e-10 * base.variance);
  }
  EXPECT_THROW(frim::residual_stats(PhaseGrid(3), b, pupil), frim::ShapeError);
}

TEST(Strehl, Values) {
  EXPECT_EQ(frim::strehl(0.0), 1.0);
  EXPECT_NEAR(frim::strehl(1.0), 0.36787944117, 1e-11);
  EXPECT_NEAR(frim::strehl(0.1), 0.90483741804, 1e-11);
  double prev = 2.0;
  for (int i = 0; i < 100; ++i) {
    const double s = frim::strehl(0.05 * i);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(StructureFunction, ConstantScreensGiveZero) {
  std::vector<PhaseGrid> screens(3, PhaseGrid(4));
  for (auto& s : screens) {
    for (double& v : s.values()) v = 2.0;
  }
  const auto est = frim::empirical_structure_function(screens, 4);
  for (double v : est.map) EXPECT_EQ(v, 0.0);
  for (const auto& bin : est.profile) EXPECT_EQ(bin.value, 0.0);
}

TEST(StructureFunction, RampGivesSquaredOffset) {
  PhaseGrid ramp(4);
  for (int y = 0; y < ramp.side(); ++y) {
    for (int x = 0; x < ramp.side(); ++x) ramp(x, y) = x;
  }
  const std::vector<PhaseGrid> screens{ramp};
  const auto est = frim::empirical_structure_function(screens, 5);
  for (int dy = -5; dy <= 5; ++dy) {
    for (int dx = -5; dx <= 5; ++dx) EXPECT_NEAR(est.at(dx, dy), dx * dx, 1e-12) << dx << "," << dy;
  }
  ASSERT_EQ(est.profile.size(), 5u);
  for (const auto& bin : est.profile) EXPECT_GT(bin.offsets, 0u);
}

TEST(StructureFunction, AccumulatorMatchesBatch) {
  std::vector<PhaseGrid> screens(4, PhaseGrid(4));
  for (std::size_t i = 0; i < screens.size(); ++i) frim::NormalRng(i + 10).fill(screens[i].values());
  const auto batch = frim::empirical_structure_function(screens, 6);
  frim::StructureAccumulator acc(17, 6);
  for (const auto& s : screens) acc.add(s);
  const auto inc = acc.finish();
  EXPECT_EQ(acc.screens(), 4u);
  ASSERT_EQ(batch.map.size(), inc.map.size());
  for (std::size_t i = 0; i < batch.map.size(); ++i) EXPECT_DOUBLE_EQ(batch.map[i], inc.map[i]);
  // Map symmetry D(d) = D(-d).
  for (int dy = -6; dy <= 6; ++dy) {
    for (int dx = -6; dx <= 6; ++dx) EXPECT_DOUBLE_EQ(inc.at(dx, dy), inc.at(-dx, -dy));
  }
}

TEST(StructureFunction, RejectsBadArguments) {
  EXPECT_THROW(frim::StructureAccumulator(17, 17), frim::DomainError);
  EXPECT_THROW(frim::StructureAccumulator(17, 0), frim::DomainError);
  frim::StructureAccumulator acc(17, 4);
  EXPECT_THROW(acc.add(PhaseGrid(3)), frim::ShapeError);
  EXPECT_THROW(acc.finish(), frim::DomainError);
}

TEST(FlopReport, ModelsAndReset) {
  const frim::FlopModelInput pcg{4225, 10, true, true};
  EXPECT_DOUBLE_EQ(frim::model_total_flops(pcg), 363.0 * 4225);
  EXPECT_DOUBLE_EQ(frim::model_overhead_flops(pcg), 350.0 * 4225);
  const frim::FlopModelInput cg{100, 3, false, false};
  EXPECT_DOUBLE_EQ(frim::model_total_flops(cg), (23.0 + 99.0) * 100);
  EXPECT_DOUBLE_EQ(frim::model_overhead_flops(cg), (4.0 + 99.0) * 100);

  frim::FlopCounter c{10, 20, 30, 40};
  const auto rows = frim::flop_report(c, pcg);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[4].item, "total");
  EXPECT_EQ(rows[4].measured, 100.0);
  EXPECT_EQ(rows[4].model, 363.0 * 4225);
  frim::FlopCounter other{1, 1, 1, 1};
  c.merge(other);
  EXPECT_EQ(c.total(), 104u);
  c.reset();
  EXPECT_EQ(c.total(), 0u);
}
