#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "frim/flops.hpp"
#include "frim/phase_grid.hpp"

namespace frim {

/// Location of one valid subaperture by its lower-left phase sample.
struct Subaperture {
  int ix = 0;
  int iy = 0;
};

/// Annular pupil over a Fried-geometry Shack-Hartmann sensor: phase samples
/// sit at the corners of square subapertures of one grid step.
class Pupil {
 public:
  /// Pupil diameter spans the grid (n - 1 steps); the central obscuration
  /// has diameter `obscuration` times that. A subaperture is valid iff its
  /// four corners lie inside the annulus.
  static Pupil annular(int side, double obscuration = 1.0 / 3.0);

  /// Arbitrary set of valid cells; `cell_mask` has (n - 1)^2 entries,
  /// row major.
  static Pupil from_cell_mask(int side, const std::vector<bool>& cell_mask);

  int side() const noexcept { return side_; }
  std::size_t subaperture_count() const noexcept { return subapertures_.size(); }
  /// Number of slope measurements, two per subaperture.
  std::size_t data_count() const noexcept { return 2 * subapertures_.size(); }
  const std::vector<Subaperture>& subapertures() const noexcept { return subapertures_; }

  /// Samples that are a corner of at least one valid subaperture.
  const std::vector<std::uint8_t>& sample_mask() const noexcept { return sample_mask_; }
  std::size_t sample_count() const noexcept { return sample_count_; }

  /// Subaperture index of cell (ix, iy), or -1.
  long subaperture_at(int ix, int iy) const noexcept {
    return cell_index_[static_cast<std::size_t>(iy) * static_cast<std::size_t>(side_ - 1) +
                       static_cast<std::size_t>(ix)];
  }

 private:
  Pupil(int side, const std::vector<bool>& cell_mask);

  int side_ = 0;
  std::vector<Subaperture> subapertures_;
  std::vector<long> cell_index_;
  std::vector<std::uint8_t> sample_mask_;
  std::size_t sample_count_ = 0;
};

/// Slope measurements d, interleaved (dx, dy) per subaperture, with the
/// per-measurement noise variance.
struct SlopeSet {
  std::vector<double> values;
  std::vector<double> variance;

  std::size_t size() const noexcept { return values.size(); }
  /// Throws ShapeError / DomainError unless sizes match the pupil and every
  /// variance is positive.
  void validate(const Pupil& pupil) const;
};

/// d = S w with d_x = (w(x+1,y+1) + w(x+1,y) - w(x,y+1) - w(x,y)) / 2 and
/// d_y = (w(x+1,y+1) - w(x+1,y) + w(x,y+1) - w(x,y)) / 2.
void apply_sensor(std::span<const double> phase, const Pupil& pupil, std::span<double> slopes,
                  FlopCounter* flops = nullptr);

/// w = S^T d. Samples outside the pupil mask receive 0.
void apply_sensor_transpose(std::span<const double> slopes, const Pupil& pupil, std::span<double> phase,
                            FlopCounter* flops = nullptr);

std::vector<double> apply_sensor(const PhaseGrid& phase, const Pupil& pupil);
PhaseGrid apply_sensor_transpose(std::span<const double> slopes, const Pupil& pupil);

/// d = S w_true + n with n ~ N(0, noise_std^2) i.i.d. Noiseless data
/// (noise_std = 0) are tagged with unit variance so the data term stays
/// defined.
SlopeSet simulate_measurements(const PhaseGrid& truth, const Pupil& pupil, double noise_std, std::uint64_t seed);

}  // namespace frim
