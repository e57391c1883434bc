#pragma once

#include <cstdint>

namespace frim {

/// Floating-point operation tallies, one multiply-add counting as two.
/// Each solve owns its counter; aggregate with merge().
struct FlopCounter {
  std::uint64_t fractal = 0;  // K, K^T, K^-1, K^-T
  std::uint64_t sensor = 0;   // S, S^T
  std::uint64_t noise = 0;    // C_e^-1 weighting
  std::uint64_t vector = 0;   // dot products, axpy updates, preconditioner

  std::uint64_t total() const noexcept { return fractal + sensor + noise + vector; }

  void reset() noexcept { *this = FlopCounter{}; }

  void merge(const FlopCounter& other) noexcept {
    fractal += other.fractal;
    sensor += other.sensor;
    noise += other.noise;
    vector += other.vector;
  }
};

}  // namespace frim
