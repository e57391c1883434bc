#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace frim {

/// SplitMix64 finaliser applied to (master, trial, stream). Gives every
/// trial and purpose its own independent, schedule-free seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream = 0);

/// Deterministic normal variates: MT19937-64 uniforms fed through the
/// Marsaglia polar method. Bit-identical for a given seed on any platform
/// with IEEE doubles and a conforming libm.
class NormalRng {
 public:
  explicit NormalRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal();

  void fill(std::span<double> out, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace frim
