// frim: wavefront reconstruction driver.
//
//   frim generate    --p 6 --r0 1 --seed 1 --out screen.frim
//   frim sense       --in screen.frim --noise-std 1 --seed 2 --out slopes.csv
//   frim reconstruct --in slopes.csv --p 6 --method u-pcg-opt --out w.frim --trace trace.csv
//   frim simulate    --p 6 --noise-std 1,0.5,0.1 --method u-pcg-opt,w-cg --trials 100 --out curves.csv
//   frim validate-sf --p 5 --trials 1000 --out sf.csv
//   frim bench       --p-min 5 --p-max 8 --out bench.csv

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "frim/errors.hpp"
#include "frim/experiment.hpp"
#include "frim/io.hpp"
#include "frim/precond_cache.hpp"
#include "frim/turbulence.hpp"

namespace {

struct Options {
  int p = 6;
  double r0 = 1.0;
  std::vector<double> noise{1.0};
  std::vector<std::string> methods{"u-pcg-opt"};
  int max_iter = 30;
  double tol = 1e-3;
  int trials = 100;
  std::uint64_t seed = 1;
  std::string in;
  std::string out;
  std::string trace;
  std::string truth;
  std::string map;
  std::string cache_dir;
  int max_offset = 0;
  unsigned threads = 0;
  int p_min = 5;
  int p_max = 8;
  int iterations = 10;
  std::string bench_method = "u-pcg-jac";
};

std::string header(const std::string& command, const std::string& details) {
  return "frim " + command + " " + details;
}

frim::FractalOperator make_operator(int p, double r0) {
  const int side = frim::PhaseGrid::side_for(p);
  return frim::FractalOperator(frim::StructureFunction::kolmogorov(r0, side - 1), p);
}

void cmd_generate(const Options& o) {
  const auto k = make_operator(o.p, o.r0);
  frim::write_grid(o.out, frim::generate_screen(k, o.seed));
}

void cmd_sense(const Options& o) {
  const frim::PhaseGrid screen = frim::read_grid(o.in);
  const frim::Pupil pupil = frim::Pupil::annular(screen.side());
  const frim::SlopeSet slopes = frim::simulate_measurements(screen, pupil, o.noise.front(), o.seed);
  std::ostringstream d;
  d.precision(17);
  d << "in=" << o.in << " n=" << screen.side() << " noise_std=" << o.noise.front() << " seed=" << o.seed;
  frim::write_slopes_csv(o.out, pupil, slopes, header("sense", d.str()));
}

void cmd_reconstruct(const Options& o) {
  const auto k = make_operator(o.p, o.r0);
  const frim::Pupil pupil = frim::Pupil::annular(k.side());
  const frim::SlopeSet slopes = frim::read_slopes_csv(o.in, pupil);
  const frim::SolverConfig config{frim::SolverVariant::parse(o.methods.front()), o.max_iter, o.tol,
                                  frim::InitialGuess::Zero};
  config.validate();
  std::optional<frim::PhaseGrid> truth;
  if (!o.truth.empty()) truth = frim::read_grid(o.truth);
  const auto problem = frim::ReconstructionProblem::for_slopes(k, pupil, slopes);
  std::optional<frim::DiagonalPreconditioner> pre;
  if (config.variant.preconditioner != frim::PreconditionerKind::None) {
    frim::PreconditionerCache cache =
        o.cache_dir.empty() ? frim::PreconditionerCache() : frim::PreconditionerCache(o.cache_dir);
    pre = cache.get(problem, config.variant.space, config.variant.preconditioner);
  }
  const frim::Reconstruction rec =
      frim::reconstruct(problem, slopes.values, config, pre ? &*pre : nullptr, truth ? &*truth : nullptr);
  frim::write_grid(o.out, rec.estimate);
  if (!o.trace.empty()) {
    std::ostringstream d;
    d.precision(17);
    d << "in=" << o.in << " p=" << o.p << " r0=" << o.r0 << " method=" << config.variant.name()
      << " max_iter=" << o.max_iter << " tol=" << o.tol;
    frim::write_trace_csv(o.trace, rec.trace, header("reconstruct", d.str()));
  }
  std::cerr << config.variant.name() << ": " << rec.trace.iterations << " iterations, " << rec.flops.total()
            << " flops\n";
}

void cmd_simulate(const Options& o) {
  frim::ExperimentSpec spec;
  spec.scales = o.p;
  spec.r0 = o.r0;
  spec.noise_levels = o.noise;
  spec.variants.clear();
  for (const auto& m : o.methods) spec.variants.push_back(frim::SolverVariant::parse(m));
  spec.max_iterations = o.max_iter;
  spec.tolerance = o.tol;
  spec.trials = o.trials;
  spec.seed = o.seed;
  spec.threads = o.threads;
  if (!o.cache_dir.empty()) spec.cache_directory = o.cache_dir;
  const auto result = frim::run_simulation(spec);
  frim::write_curves_csv(o.out, result, header("simulate", spec.describe()));
}

void cmd_validate_sf(const Options& o) {
  const auto sf = frim::validate_structure_function(o.p, o.r0, o.trials, o.seed, o.max_offset);
  std::ostringstream d;
  d.precision(17);
  d << "p=" << o.p << " r0=" << o.r0 << " trials=" << o.trials << " seed=" << o.seed
    << " max_offset=" << sf.estimate.max_offset;
  frim::write_structure_csv(o.out, sf, header("validate-sf", d.str()));
  if (!o.map.empty()) frim::write_square_map(o.map, 2 * sf.estimate.max_offset + 1, sf.estimate.map);
}

void cmd_bench(const Options& o) {
  frim::BenchSpec spec;
  spec.min_scales = o.p_min;
  spec.max_scales = o.p_max;
  spec.r0 = o.r0;
  spec.noise_std = o.noise.front();
  spec.iterations = o.iterations;
  spec.variant = frim::SolverVariant::parse(o.bench_method);
  spec.seed = o.seed;
  const auto rows = frim::run_bench(spec);
  frim::write_bench_csv(o.out, rows, header("bench", spec.describe()));
  for (const auto& r : rows) {
    if (r.item == "reconstruction") {
      std::cerr << "p=" << r.scales << " N=" << r.unknowns << " flops/N=" << r.flops_per_unknown
                << " seconds=" << r.seconds << '\n';
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Fractal-prior wavefront reconstruction from Shack-Hartmann slopes"};
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Draw a Kolmogorov phase screen");
  generate->add_option("--p", o.p, "Grid has 2^p + 1 samples per side")->capture_default_str();
  generate->add_option("--r0", o.r0, "Fried parameter in grid steps")->capture_default_str();
  generate->add_option("--seed", o.seed)->capture_default_str();
  generate->add_option("--out", o.out, "Output grid file")->required();

  auto* sense = app.add_subcommand("sense", "Simulate noisy slopes from a screen");
  sense->add_option("--in", o.in, "Input grid file")->required()->check(CLI::ExistingFile);
  sense->add_option("--noise-std", o.noise, "Slope noise, rad per subaperture")->expected(1)->capture_default_str();
  sense->add_option("--seed", o.seed)->capture_default_str();
  sense->add_option("--out", o.out, "Output slopes CSV")->required();

  auto* recon = app.add_subcommand("reconstruct", "Reconstruct a wavefront from slopes");
  recon->add_option("--in", o.in, "Slopes CSV")->required()->check(CLI::ExistingFile);
  recon->add_option("--p", o.p, "Grid scale the slopes were taken on")->required();
  recon->add_option("--r0", o.r0)->capture_default_str();
  recon->add_option("--method", o.methods)->expected(1)->capture_default_str();
  recon->add_option("--max-iter", o.max_iter)->capture_default_str();
  recon->add_option("--tol", o.tol, "Relative residual tolerance")->capture_default_str();
  recon->add_option("--truth", o.truth, "Reference screen; fills the residual columns of the trace")
      ->check(CLI::ExistingFile);
  recon->add_option("--cache-dir", o.cache_dir, "Directory for cached preconditioners");
  recon->add_option("--out", o.out, "Output grid file")->required();
  recon->add_option("--trace", o.trace, "Convergence trace CSV");

  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo convergence curves");
  simulate->add_option("--p", o.p)->capture_default_str();
  simulate->add_option("--r0", o.r0)->capture_default_str();
  simulate->add_option("--noise-std", o.noise)->delimiter(',')->capture_default_str();
  simulate->add_option("--method", o.methods)->delimiter(',')->capture_default_str();
  simulate->add_option("--max-iter", o.max_iter)->capture_default_str();
  simulate->add_option("--tol", o.tol)->capture_default_str();
  simulate->add_option("--trials", o.trials)->capture_default_str();
  simulate->add_option("--seed", o.seed)->capture_default_str();
  simulate->add_option("--threads", o.threads, "Worker threads, 0 for all cores")->capture_default_str();
  simulate->add_option("--cache-dir", o.cache_dir);
  simulate->add_option("--out", o.out, "Curves CSV")->required();

  auto* validate = app.add_subcommand("validate-sf", "Empirical structure function of generated screens");
  validate->add_option("--p", o.p)->capture_default_str();
  validate->add_option("--r0", o.r0)->capture_default_str();
  validate->add_option("--trials", o.trials)->capture_default_str();
  validate->add_option("--seed", o.seed)->capture_default_str();
  validate->add_option("--max-offset", o.max_offset, "0 for (n - 1) / 2");
  validate->add_option("--map", o.map, "2D map as a grid file");
  validate->add_option("--out", o.out, "Profile CSV")->required();

  auto* bench = app.add_subcommand("bench", "Flop counts and timings across grid sizes");
  bench->add_option("--p-min", o.p_min)->capture_default_str();
  bench->add_option("--p-max", o.p_max)->capture_default_str();
  bench->add_option("--r0", o.r0)->capture_default_str();
  bench->add_option("--noise-std", o.noise)->expected(1)->capture_default_str();
  bench->add_option("--method", o.bench_method)->capture_default_str();
  bench->add_option("--max-iter", o.iterations, "Fixed iteration count")->capture_default_str();
  bench->add_option("--seed", o.seed)->capture_default_str();
  bench->add_option("--out", o.out, "Bench CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*generate) cmd_generate(o);
    if (*sense) cmd_sense(o);
    if (*recon) cmd_reconstruct(o);
    if (*simulate) cmd_simulate(o);
    if (*validate) cmd_validate_sf(o);
    if (*bench) cmd_bench(o);
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
