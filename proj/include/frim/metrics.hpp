#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "frim/flops.hpp"
#include "frim/phase_grid.hpp"
#include "frim/sensor.hpp"

namespace frim {

struct ResidualStats {
  double rms = 0.0;
  double variance = 0.0;
};

/// Piston-removed error of `estimate` against `truth` over the pupil
/// samples.
ResidualStats residual_stats(std::span<const double> estimate, std::span<const double> truth, const Pupil& pupil);
ResidualStats residual_stats(const PhaseGrid& estimate, const PhaseGrid& truth, const Pupil& pupil);

/// exp(-variance).
double strehl(double variance);

struct RadialBin {
  double radius = 0.0;  // mean |offset| of the offsets in the annulus
  double value = 0.0;   // mean D over those offsets
  std::size_t offsets = 0;
};

/// Empirical structure function on the full square grid (no pupil mask).
struct StructureEstimate {
  int max_offset = 0;
  /// (2m+1)^2 map, D at offset (dx, dy) stored at (dx + m, dy + m).
  std::vector<double> map;
  /// Annuli of unit width centred on integer radii 1..m.
  std::vector<RadialBin> profile;

  double at(int dx, int dy) const {
    const int side = 2 * max_offset + 1;
    return map[static_cast<std::size_t>(dy + max_offset) * side + static_cast<std::size_t>(dx + max_offset)];
  }
};

/// Averages [w(r + d) - w(r)]^2 over positions and screens for every
/// offset d with |dx|, |dy| <= max_offset.
StructureEstimate empirical_structure_function(std::span<const PhaseGrid> screens, int max_offset);

/// Incremental form of empirical_structure_function, so screens need not
/// all be held in memory.
class StructureAccumulator {
 public:
  StructureAccumulator(int side, int max_offset);
  void add(const PhaseGrid& screen);
  StructureEstimate finish() const;
  std::size_t screens() const noexcept { return screens_; }

 private:
  int side_;
  int max_offset_;
  std::size_t screens_ = 0;
  std::vector<double> sums_;  // half plane dy >= 0
};

/// Measured tallies alongside the operation-count model.
struct FlopReportRow {
  std::string item;
  double measured = 0.0;
  double model = 0.0;
};

struct FlopModelInput {
  std::size_t unknowns = 0;  // N
  int iterations = 0;
  bool preconditioned = false;
  bool u_space = false;
};

/// Per-N model: total (23 + 33 k) N for CG or (23 + 34 k) N for PCG, and the
/// overhead form (4 or 10 + 33/34 k) N for w / u unknowns started from zero.
std::vector<FlopReportRow> flop_report(const FlopCounter& counter, const FlopModelInput& input);

double model_total_flops(const FlopModelInput& input);
double model_overhead_flops(const FlopModelInput& input);

}  // namespace frim
