#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frim/fractal.hpp"
#include "frim/metrics.hpp"
#include "frim/phase_grid.hpp"
#include "frim/sensor.hpp"
#include "frim/solver.hpp"

namespace frim {

/// Seed streams under one master seed.
enum SeedStream : std::uint64_t { kScreenStream = 0, kNoiseStream = 1 };

/// w = K u with u ~ N(0, I).
PhaseGrid generate_screen(const FractalOperator& k, std::uint64_t seed);

/// FNV-1a over the raw bytes of a slope vector.
std::uint64_t hash_slopes(std::span<const double> values);

struct ExperimentSpec {
  int scales = 6;
  double r0 = 1.0;  // grid steps
  std::vector<double> noise_levels{1.0};
  std::vector<SolverVariant> variants{SolverVariant{}};
  int max_iterations = 30;
  double tolerance = 1e-3;
  int trials = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  std::optional<std::filesystem::path> cache_directory;

  /// Throws DomainError on out-of-range fields.
  void validate() const;
  /// One-line key=value summary written at the top of output files.
  std::string describe() const;
};

struct CurvePoint {
  int iter = 0;
  double flops = 0.0;  // median cumulative flops
  double resid_var = 0.0;
  double resid_var_norm = 0.0;
  double strehl = 0.0;
};

struct Curve {
  double noise_std = 0.0;
  SolverVariant variant;
  std::vector<CurvePoint> median;           // rows 0..max_iterations
  std::vector<ConvergenceTrace> traces;     // one per trial
  std::vector<std::uint64_t> slope_hashes;  // one per trial
};

struct SimulationResult {
  ExperimentSpec spec;
  std::vector<Curve> curves;  // noise-major, then in the order of spec.variants
};

/// Runs spec.trials independent trials. Every trial draws one screen and,
/// per noise level, one noise realisation shared by all variants. Shorter
/// traces (early convergence) are held at their last value before the
/// per-iteration median is taken.
SimulationResult run_simulation(const ExperimentSpec& spec);

/// Mean of 6.88 (|d| / r0)^(5/3) over the offsets of each radial bin, in the
/// same binning as StructureEstimate::profile.
std::vector<double> theory_profile(const StructureEstimate& estimate, double r0);

struct StructureValidation {
  StructureEstimate estimate;
  std::vector<double> theory;  // aligned with estimate.profile
};

/// `trials` screens on a (2^p + 1)^2 grid; max_offset defaults to (n - 1) / 2.
StructureValidation validate_structure_function(int scales, double r0, int trials, std::uint64_t seed,
                                                int max_offset = 0);

struct BenchRow {
  int scales = 0;
  int side = 0;
  std::size_t unknowns = 0;
  std::string item;  // apply_K, apply_K_inverse, ..., pcg_iteration, reconstruction
  double flops = 0.0;
  double flops_per_unknown = 0.0;
  double model_flops = 0.0;  // NaN where no closed count exists
  double seconds = 0.0;
};

struct BenchSpec {
  int min_scales = 5;
  int max_scales = 8;
  double r0 = 1.0;
  double noise_std = 1.0;
  int iterations = 10;
  SolverVariant variant{Space::U, PreconditionerKind::Jacobi};
  std::uint64_t seed = 1;

  void validate() const;
  std::string describe() const;
};

/// Per size: each operator once, one PCG iteration (averaged), and a full
/// reconstruction at a fixed iteration count from zero.
std::vector<BenchRow> run_bench(const BenchSpec& spec);

}  // namespace frim
