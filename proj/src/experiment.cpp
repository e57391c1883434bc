#include "frim/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "frim/errors.hpp"
#include "frim/precond_cache.hpp"
#include "frim/random.hpp"
#include "frim/turbulence.hpp"

namespace frim {

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

FractalOperator kolmogorov_operator(int scales, double r0) {
  const int side = PhaseGrid::side_for(scales);
  return FractalOperator(StructureFunction::kolmogorov(r0, side - 1), scales);
}

template <typename Work>
void parallel_for(int count, unsigned threads, Work work) {
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        work(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

const TraceRow& row_at(const ConvergenceTrace& trace, int iter) {
  return trace.rows[std::min<std::size_t>(static_cast<std::size_t>(iter), trace.rows.size() - 1)];
}

}  // namespace

PhaseGrid generate_screen(const FractalOperator& k, std::uint64_t seed) {
  PhaseGrid grid(k.scales());
  NormalRng rng(seed);
  rng.fill(grid.values());
  k.apply(grid);
  return grid;
}

std::uint64_t hash_slopes(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentSpec::validate() const {
  PhaseGrid::side_for(scales);
  if (!(r0 > 0.0)) throw DomainError("r0 must be > 0");
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (noise_levels.empty()) throw DomainError("at least one noise level is required");
  for (double s : noise_levels) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("noise levels must be finite and >= 0");
  }
  if (variants.empty()) throw DomainError("at least one method is required");
  SolverConfig{variants.front(), max_iterations, tolerance, InitialGuess::Zero}.validate();
}

std::string ExperimentSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "p=" << scales << " n=" << PhaseGrid::side_for(scales) << " r0=" << r0 << " noise_std=";
  for (std::size_t i = 0; i < noise_levels.size(); ++i) os << (i ? "," : "") << noise_levels[i];
  os << " method=";
  for (std::size_t i = 0; i < variants.size(); ++i) os << (i ? "," : "") << variants[i].name();
  os << " max_iter=" << max_iterations << " tol=" << tolerance << " trials=" << trials << " seed=" << seed;
  return os.str();
}

SimulationResult run_simulation(const ExperimentSpec& spec) {
  spec.validate();
  const FractalOperator k = kolmogorov_operator(spec.scales, spec.r0);
  const Pupil pupil = Pupil::annular(k.side());
  const std::size_t n_noise = spec.noise_levels.size();
  const std::size_t n_var = spec.variants.size();

  // Weights depend only on the noise level, so one problem (and one
  // preconditioner per variant) serves every trial.
  std::vector<ReconstructionProblem> problems;
  for (double sigma : spec.noise_levels) {
    const double variance = sigma > 0.0 ? sigma * sigma : 1.0;
    problems.emplace_back(k, pupil, std::vector<double>(pupil.data_count(), 1.0 / variance));
  }
  PreconditionerCache cache = spec.cache_directory ? PreconditionerCache(*spec.cache_directory) : PreconditionerCache();
  std::vector<std::optional<DiagonalPreconditioner>> preconditioners(n_noise * n_var);
  for (std::size_t a = 0; a < n_noise; ++a) {
    for (std::size_t v = 0; v < n_var; ++v) {
      const SolverVariant& variant = spec.variants[v];
      if (variant.preconditioner != PreconditionerKind::None) {
        preconditioners[a * n_var + v] = cache.get(problems[a], variant.space, variant.preconditioner);
      }
    }
  }

  SimulationResult result;
  result.spec = spec;
  for (double sigma : spec.noise_levels) {
    for (const auto& variant : spec.variants) {
      Curve curve;
      curve.noise_std = sigma;
      curve.variant = variant;
      curve.traces.resize(static_cast<std::size_t>(spec.trials));
      curve.slope_hashes.resize(static_cast<std::size_t>(spec.trials));
      result.curves.push_back(std::move(curve));
    }
  }

  parallel_for(spec.trials, spec.threads, [&](int trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    const PhaseGrid truth = generate_screen(k, derive_seed(spec.seed, t, kScreenStream));
    for (std::size_t a = 0; a < n_noise; ++a) {
      const SlopeSet slopes =
          simulate_measurements(truth, pupil, spec.noise_levels[a], derive_seed(spec.seed, t, kNoiseStream));
      const std::uint64_t hash = hash_slopes(slopes.values);
      for (std::size_t v = 0; v < n_var; ++v) {
        const SolverConfig config{spec.variants[v], spec.max_iterations, spec.tolerance, InitialGuess::Zero};
        const auto& pre = preconditioners[a * n_var + v];
        Reconstruction rec = reconstruct(problems[a], slopes.values, config, pre ? &*pre : nullptr, &truth);
        Curve& curve = result.curves[a * n_var + v];
        curve.traces[static_cast<std::size_t>(trial)] = std::move(rec.trace);
        curve.slope_hashes[static_cast<std::size_t>(trial)] = hash;
      }
    }
  });

  for (Curve& curve : result.curves) {
    std::vector<double> flops(curve.traces.size());
    std::vector<double> var(curve.traces.size());
    std::vector<double> norm(curve.traces.size());
    std::vector<double> strehls(curve.traces.size());
    for (int it = 0; it <= spec.max_iterations; ++it) {
      for (std::size_t i = 0; i < curve.traces.size(); ++i) {
        const TraceRow& row = row_at(curve.traces[i], it);
        flops[i] = static_cast<double>(row.flops);
        var[i] = row.resid_var;
        norm[i] = row.resid_var_norm;
        strehls[i] = row.strehl;
      }
      curve.median.push_back({it, median(flops), median(var), median(norm), median(strehls)});
    }
  }
  return result;
}

std::vector<double> theory_profile(const StructureEstimate& estimate, double r0) {
  const int m = estimate.max_offset;
  std::vector<double> sums(static_cast<std::size_t>(m), 0.0);
  std::vector<std::size_t> counts(static_cast<std::size_t>(m), 0);
  for (int dy = -m; dy <= m; ++dy) {
    for (int dx = -m; dx <= m; ++dx) {
      const double r = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
      const long k = std::lround(r);
      if (k < 1 || k > m) continue;
      sums[static_cast<std::size_t>(k - 1)] += kolmogorov_structure(r, r0);
      ++counts[static_cast<std::size_t>(k - 1)];
    }
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < sums.size(); ++i) out.push_back(counts[i] ? sums[i] / counts[i] : std::nan(""));
  return out;
}

StructureValidation validate_structure_function(int scales, double r0, int trials, std::uint64_t seed,
                                                int max_offset) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  const FractalOperator k = kolmogorov_operator(scales, r0);
  if (max_offset <= 0) max_offset = (k.side() - 1) / 2;
  StructureAccumulator acc(k.side(), max_offset);
  for (int t = 0; t < trials; ++t) {
    acc.add(generate_screen(k, derive_seed(seed, static_cast<std::uint64_t>(t), kScreenStream)));
  }
  StructureValidation out;
  out.estimate = acc.finish();
  out.theory = theory_profile(out.estimate, r0);
  return out;
}

void BenchSpec::validate() const {
  PhaseGrid::side_for(min_scales);
  PhaseGrid::side_for(max_scales);
  if (min_scales > max_scales) throw DomainError("empty size range");
  if (!(r0 > 0.0)) throw DomainError("r0 must be > 0");
  if (!(noise_std > 0.0)) throw DomainError("bench noise level must be > 0");
  if (iterations < 1) throw DomainError("iterations must be >= 1");
}

std::string BenchSpec::describe() const {
  std::ostringstream os;
  os << "p=" << min_scales << ".." << max_scales << " r0=" << r0 << " noise_std=" << noise_std
     << " method=" << variant.name() << " iterations=" << iterations << " seed=" << seed;
  return os.str();
}

std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  spec.validate();
  using clock = std::chrono::steady_clock;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<BenchRow> rows;
  for (int p = spec.min_scales; p <= spec.max_scales; ++p) {
    const FractalOperator k = kolmogorov_operator(p, spec.r0);
    const Pupil pupil = Pupil::annular(k.side());
    const std::size_t n = k.size();
    const double nd = static_cast<double>(n);
    auto add = [&](std::string item, const FlopCounter& c, double model, double seconds) {
      const double f = static_cast<double>(c.total());
      rows.push_back({p, k.side(), n, std::move(item), f, f / nd, model, seconds});
    };

    std::vector<double> grid(n);
    NormalRng(derive_seed(spec.seed, static_cast<std::uint64_t>(p), 7)).fill(grid);
    const double k_model = 6.0 * nd - 14.0;
    const std::pair<const char*, void (FractalOperator::*)(std::span<double>, FlopCounter*) const> ops[] = {
        {"apply_K", &FractalOperator::apply},
        {"apply_K_inverse", &FractalOperator::apply_inverse},
        {"apply_K_transpose", &FractalOperator::apply_transpose},
        {"apply_K_inverse_transpose", &FractalOperator::apply_inverse_transpose}};
    for (const auto& [name, op] : ops) {
      FlopCounter c;
      const auto t0 = clock::now();
      (k.*op)(grid, &c);
      add(name, c, k_model, std::chrono::duration<double>(clock::now() - t0).count());
    }
    {
      std::vector<double> slopes(pupil.data_count());
      FlopCounter c;
      auto t0 = clock::now();
      apply_sensor(grid, pupil, slopes, &c);
      add("apply_S", c, 6.0 * static_cast<double>(pupil.subaperture_count()),
          std::chrono::duration<double>(clock::now() - t0).count());
      c.reset();
      t0 = clock::now();
      apply_sensor_transpose(slopes, pupil, grid, &c);
      add("apply_S_transpose", c, 8.0 * static_cast<double>(pupil.subaperture_count()),
          std::chrono::duration<double>(clock::now() - t0).count());
    }

    const PhaseGrid truth = generate_screen(k, derive_seed(spec.seed, static_cast<std::uint64_t>(p), kScreenStream));
    const SlopeSet slopes =
        simulate_measurements(truth, pupil, spec.noise_std, derive_seed(spec.seed, static_cast<std::uint64_t>(p), kNoiseStream));
    const ReconstructionProblem problem = ReconstructionProblem::for_slopes(k, pupil, slopes);
    std::optional<DiagonalPreconditioner> pre;
    if (spec.variant.preconditioner != PreconditionerKind::None) {
      const auto t0 = clock::now();
      pre = build_preconditioner(problem, spec.variant.space, spec.variant.preconditioner);
      rows.push_back({p, k.side(), n, "preconditioner_build", nan, nan, nan,
                      std::chrono::duration<double>(clock::now() - t0).count()});
    }
    // Fixed iteration count: a tolerance no run can reach.
    const SolverConfig config{spec.variant, spec.iterations, 1e-300, InitialGuess::Zero};
    const auto t0 = clock::now();
    const Reconstruction rec = reconstruct(problem, slopes.values, config, pre ? &*pre : nullptr);
    const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
    const int iters = rec.trace.iterations;
    if (iters < 1) throw std::runtime_error("bench reconstruction stopped before the first iteration");
    const bool preconditioned = spec.variant.preconditioner != PreconditionerKind::None;
    const double per_iter =
        static_cast<double>(rec.trace.rows[static_cast<std::size_t>(iters)].flops - rec.trace.rows[0].flops) / iters;
    rows.push_back({p, k.side(), n, "pcg_iteration", per_iter, per_iter / nd, (preconditioned ? 34.0 : 33.0) * nd,
                    seconds / iters});
    const FlopModelInput model{n, iters, preconditioned, spec.variant.space == Space::U};
    add("reconstruction", rec.flops, model_total_flops(model), seconds);
  }
  return rows;
}

}  // namespace frim
