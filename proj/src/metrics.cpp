#include "frim/metrics.hpp"

#include <cmath>

#include "frim/errors.hpp"

namespace frim {

ResidualStats residual_stats(std::span<const double> estimate, std::span<const double> truth, const Pupil& pupil) {
  const auto& mask = pupil.sample_mask();
  if (estimate.size() != mask.size() || truth.size() != mask.size()) {
    throw ShapeError("residual_stats: grids do not match the pupil");
  }
  const std::size_t count = pupil.sample_count();
  if (count == 0) throw ShapeError("residual_stats: pupil has no samples");
  double mean = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) mean += estimate[i] - truth[i];
  }
  mean /= static_cast<double>(count);
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      const double e = estimate[i] - truth[i] - mean;
      sum_sq += e * e;
    }
  }
  const double variance = sum_sq / static_cast<double>(count);
  return {std::sqrt(variance), variance};
}

ResidualStats residual_stats(const PhaseGrid& estimate, const PhaseGrid& truth, const Pupil& pupil) {
  return residual_stats(estimate.values(), truth.values(), pupil);
}

double strehl(double variance) { return std::exp(-variance); }

StructureAccumulator::StructureAccumulator(int side, int max_offset) : side_(side), max_offset_(max_offset) {
  if (max_offset < 1 || max_offset >= side) throw DomainError("max offset must lie in [1, side - 1]");
  sums_.assign(static_cast<std::size_t>(max_offset + 1) * static_cast<std::size_t>(2 * max_offset + 1), 0.0);
}

void StructureAccumulator::add(const PhaseGrid& screen) {
  if (screen.side() != side_) throw ShapeError("screen side differs from accumulator side");
  const int n = side_;
  const int m = max_offset_;
  const double* w = screen.values().data();
  for (int dy = 0; dy <= m; ++dy) {
    for (int dx = -m; dx <= m; ++dx) {
      const int x_lo = std::max(0, -dx);
      const int x_hi = std::min(n, n - dx);
      double acc = 0.0;
      for (int y = 0; y + dy < n; ++y) {
        const double* row = w + static_cast<std::size_t>(y) * n;
        const double* shifted = w + static_cast<std::size_t>(y + dy) * n + dx;
        for (int x = x_lo; x < x_hi; ++x) {
          const double d = shifted[x] - row[x];
          acc += d * d;
        }
      }
      sums_[static_cast<std::size_t>(dy) * (2 * m + 1) + static_cast<std::size_t>(dx + m)] += acc;
    }
  }
  ++screens_;
}

StructureEstimate StructureAccumulator::finish() const {
  if (screens_ == 0) throw DomainError("no screens accumulated");
  const int n = side_;
  const int m = max_offset_;
  const int side = 2 * m + 1;
  StructureEstimate out;
  out.max_offset = m;
  out.map.assign(static_cast<std::size_t>(side) * side, 0.0);
  if (screens_ == 0) return out;
  for (int dy = 0; dy <= m; ++dy) {
    for (int dx = -m; dx <= m; ++dx) {
      const double pairs = static_cast<double>(n - std::abs(dx)) * static_cast<double>(n - dy) * screens_;
      const double d = sums_[static_cast<std::size_t>(dy) * side + static_cast<std::size_t>(dx + m)] / pairs;
      out.map[static_cast<std::size_t>(dy + m) * side + static_cast<std::size_t>(dx + m)] = d;
      out.map[static_cast<std::size_t>(m - dy) * side + static_cast<std::size_t>(m - dx)] = d;
    }
  }
  std::vector<RadialBin> bins(static_cast<std::size_t>(m) + 1);
  for (int dy = -m; dy <= m; ++dy) {
    for (int dx = -m; dx <= m; ++dx) {
      const double r = std::hypot(dx, dy);
      const long k = std::lround(r);
      if (k < 1 || k > m) continue;
      auto& bin = bins[static_cast<std::size_t>(k)];
      bin.radius += r;
      bin.value += out.at(dx, dy);
      ++bin.offsets;
    }
  }
  for (std::size_t k = 1; k < bins.size(); ++k) {
    auto bin = bins[k];
    if (bin.offsets == 0) continue;
    bin.radius /= static_cast<double>(bin.offsets);
    bin.value /= static_cast<double>(bin.offsets);
    out.profile.push_back(bin);
  }
  return out;
}

StructureEstimate empirical_structure_function(std::span<const PhaseGrid> screens, int max_offset) {
  if (screens.empty()) throw DomainError("need at least one screen");
  StructureAccumulator acc(screens.front().side(), max_offset);
  for (const auto& s : screens) acc.add(s);
  return acc.finish();
}

double model_total_flops(const FlopModelInput& input) {
  const double per_iteration = input.preconditioned ? 34.0 : 33.0;
  return (23.0 + per_iteration * input.iterations) * static_cast<double>(input.unknowns);
}

double model_overhead_flops(const FlopModelInput& input) {
  const double per_iteration = input.preconditioned ? 34.0 : 33.0;
  const double overhead = input.u_space ? 10.0 : 4.0;
  return (overhead + per_iteration * input.iterations) * static_cast<double>(input.unknowns);
}

std::vector<FlopReportRow> flop_report(const FlopCounter& counter, const FlopModelInput& input) {
  std::vector<FlopReportRow> rows;
  rows.push_back({"fractal", static_cast<double>(counter.fractal), std::nan("")});
  rows.push_back({"sensor", static_cast<double>(counter.sensor), std::nan("")});
  rows.push_back({"noise", static_cast<double>(counter.noise), std::nan("")});
  rows.push_back({"vector", static_cast<double>(counter.vector), std::nan("")});
  rows.push_back({"total", static_cast<double>(counter.total()), model_total_flops(input)});
  rows.push_back({"total_overhead_model", static_cast<double>(counter.total()), model_overhead_flops(input)});
  return rows;
}

}  // namespace frim
