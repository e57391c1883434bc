#include "frim/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "frim/errors.hpp"
#include "frim/random.hpp"

namespace frim {

Pupil::Pupil(int side, const std::vector<bool>& cell_mask) : side_(side) {
  const int cells = side - 1;
  cell_index_.assign(static_cast<std::size_t>(cells) * cells, -1);
  sample_mask_.assign(static_cast<std::size_t>(side) * side, 0);
  for (int iy = 0; iy < cells; ++iy) {
    for (int ix = 0; ix < cells; ++ix) {
      const std::size_t cell = static_cast<std::size_t>(iy) * cells + ix;
      if (!cell_mask[cell]) continue;
      cell_index_[cell] = static_cast<long>(subapertures_.size());
      subapertures_.push_back({ix, iy});
      for (int dy = 0; dy <= 1; ++dy) {
        for (int dx = 0; dx <= 1; ++dx) {
          sample_mask_[static_cast<std::size_t>(iy + dy) * side + (ix + dx)] = 1;
        }
      }
    }
  }
  for (auto m : sample_mask_) sample_count_ += m;
}

Pupil Pupil::annular(int side, double obscuration) {
  PhaseGrid::scales_for_side(side);
  if (!(obscuration >= 0.0 && obscuration < 1.0)) throw DomainError("obscuration ratio must lie in [0, 1)");
  const double centre = 0.5 * (side - 1);
  const double outer = centre;
  const double inner = obscuration * outer;
  constexpr double slack = 1e-9;
  auto inside = [&](int x, int y) {
    const double r = std::hypot(x - centre, y - centre);
    return r <= outer + slack && r >= inner - slack;
  };
  const int cells = side - 1;
  std::vector<bool> mask(static_cast<std::size_t>(cells) * cells, false);
  for (int iy = 0; iy < cells; ++iy) {
    for (int ix = 0; ix < cells; ++ix) {
      mask[static_cast<std::size_t>(iy) * cells + ix] =
          inside(ix, iy) && inside(ix + 1, iy) && inside(ix, iy + 1) && inside(ix + 1, iy + 1);
    }
  }
  return Pupil(side, mask);
}

Pupil Pupil::from_cell_mask(int side, const std::vector<bool>& cell_mask) {
  if (side < 2) throw ShapeError("grid side must be at least 2");
  if (cell_mask.size() != static_cast<std::size_t>(side - 1) * static_cast<std::size_t>(side - 1)) {
    throw ShapeError("cell mask must have (n - 1)^2 entries");
  }
  return Pupil(side, cell_mask);
}

void SlopeSet::validate(const Pupil& pupil) const {
  if (values.size() != pupil.data_count()) {
    throw ShapeError("slope set has " + std::to_string(values.size()) + " values, pupil expects " +
                     std::to_string(pupil.data_count()));
  }
  if (variance.size() != values.size()) throw ShapeError("variance vector length differs from slope count");
  for (double v : variance) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("noise variances must be finite and positive");
  }
}

void apply_sensor(std::span<const double> phase, const Pupil& pupil, std::span<double> slopes,
                  FlopCounter* flops) {
  const std::size_t n = static_cast<std::size_t>(pupil.side());
  if (phase.size() != n * n) throw ShapeError("phase grid does not match the pupil");
  if (slopes.size() != pupil.data_count()) throw ShapeError("slope buffer does not match the pupil");
  const auto& subs = pupil.subapertures();
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const std::size_t i00 = static_cast<std::size_t>(subs[k].iy) * n + static_cast<std::size_t>(subs[k].ix);
    const std::size_t i10 = i00 + 1;
    const std::size_t i01 = i00 + n;
    const std::size_t i11 = i01 + 1;
    const double diag = phase[i11] - phase[i00];
    const double anti = phase[i10] - phase[i01];
    slopes[2 * k] = 0.5 * (diag + anti);
    slopes[2 * k + 1] = 0.5 * (diag - anti);
  }
  if (flops) flops->sensor += 6 * subs.size();
}

void apply_sensor_transpose(std::span<const double> slopes, const Pupil& pupil, std::span<double> phase,
                            FlopCounter* flops) {
  const std::size_t n = static_cast<std::size_t>(pupil.side());
  if (phase.size() != n * n) throw ShapeError("phase grid does not match the pupil");
  if (slopes.size() != pupil.data_count()) throw ShapeError("slope buffer does not match the pupil");
  std::fill(phase.begin(), phase.end(), 0.0);
  const auto& subs = pupil.subapertures();
  for (std::size_t k = 0; k < subs.size(); ++k) {
    const std::size_t i00 = static_cast<std::size_t>(subs[k].iy) * n + static_cast<std::size_t>(subs[k].ix);
    const std::size_t i10 = i00 + 1;
    const std::size_t i01 = i00 + n;
    const std::size_t i11 = i01 + 1;
    const double diag = 0.5 * (slopes[2 * k] + slopes[2 * k + 1]);
    const double anti = 0.5 * (slopes[2 * k] - slopes[2 * k + 1]);
    phase[i11] += diag;
    phase[i00] -= diag;
    phase[i10] += anti;
    phase[i01] -= anti;
  }
  if (flops) flops->sensor += 8 * subs.size();
}

std::vector<double> apply_sensor(const PhaseGrid& phase, const Pupil& pupil) {
  std::vector<double> out(pupil.data_count());
  apply_sensor(phase.values(), pupil, out);
  return out;
}

PhaseGrid apply_sensor_transpose(std::span<const double> slopes, const Pupil& pupil) {
  PhaseGrid out(PhaseGrid::scales_for_side(pupil.side()));
  apply_sensor_transpose(slopes, pupil, out.values());
  return out;
}

SlopeSet simulate_measurements(const PhaseGrid& truth, const Pupil& pupil, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw DomainError("noise standard deviation must be >= 0");
  if (truth.side() != pupil.side()) throw ShapeError("phase grid does not match the pupil");
  SlopeSet out;
  out.values = apply_sensor(truth, pupil);
  if (noise_std > 0.0) {
    NormalRng rng(seed);
    for (double& v : out.values) v += noise_std * rng.normal();
  }
  out.variance.assign(out.values.size(), noise_std > 0.0 ? noise_std * noise_std : 1.0);
  return out;
}

}  // namespace frim
