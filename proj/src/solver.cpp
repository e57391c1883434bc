#include "frim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <utility>

#include "frim/errors.hpp"

namespace frim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void check_size(std::span<const double> v, std::size_t n, const char* what) {
  if (v.size() != n) {
    throw ShapeError(std::string(what) + " has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(n));
  }
}

}  // namespace

std::string SolverVariant::name() const {
  std::string out = space == Space::W ? "w-" : "u-";
  switch (preconditioner) {
    case PreconditionerKind::None: return out + "cg";
    case PreconditionerKind::Jacobi: return out + "pcg-jac";
    case PreconditionerKind::OptimalDiagonal: return out + "pcg-opt";
  }
  return out;
}

SolverVariant SolverVariant::parse(std::string_view name) {
  for (const auto& v : all()) {
    if (v.name() == name) return v;
  }
  throw FormatError("unknown method '" + std::string(name) +
                    "' (expected w-cg, w-pcg-jac, w-pcg-opt, u-cg, u-pcg-jac or u-pcg-opt)");
}

std::array<SolverVariant, 6> SolverVariant::all() {
  return {{{Space::W, PreconditionerKind::None},
           {Space::W, PreconditionerKind::Jacobi},
           {Space::W, PreconditionerKind::OptimalDiagonal},
           {Space::U, PreconditionerKind::None},
           {Space::U, PreconditionerKind::Jacobi},
           {Space::U, PreconditionerKind::OptimalDiagonal}}};
}

void SolverConfig::validate() const {
  if (max_iterations < 1) throw DomainError("max_iterations must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("tolerance must be > 0");
}

namespace {
void check_positive(const std::vector<double>& values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      std::ostringstream os;
      os << what << " entry " << i << " is " << values[i] << "; the operator is broken";
      throw ConstructionError(os.str());
    }
  }
}
}  // namespace

DiagonalPreconditioner DiagonalPreconditioner::jacobi(std::vector<double> diagonal, Space space) {
  check_positive(diagonal, "Jacobi diagonal");
  return {PreconditionerKind::Jacobi, Form::Approximation, space, std::move(diagonal)};
}

DiagonalPreconditioner DiagonalPreconditioner::optimal(std::vector<double> q, Space space) {
  check_positive(q, "optimal diagonal");
  return {PreconditionerKind::OptimalDiagonal, Form::InverseApproximation, space, std::move(q)};
}

void DiagonalPreconditioner::apply(std::span<const double> r, std::span<double> z, FlopCounter* flops) const {
  check_size(r, values.size(), "preconditioner input");
  check_size(z, values.size(), "preconditioner output");
  if (form == Form::Approximation) {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / values[i];
  } else {
    for (std::size_t i = 0; i < r.size(); ++i) z[i] = values[i] * r[i];
  }
  if (flops) flops->vector += r.size();
}

ReconstructionProblem::ReconstructionProblem(const FractalOperator& fractal, const Pupil& pupil,
                                             std::vector<double> inverse_variance)
    : fractal_(&fractal), pupil_(&pupil), inverse_variance_(std::move(inverse_variance)) {
  if (pupil.side() != fractal.side()) throw ShapeError("pupil and fractal operator disagree on grid side");
  if (inverse_variance_.size() != pupil.data_count()) throw ShapeError("one weight per slope is required");
  for (double w : inverse_variance_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("inverse noise variances must be finite and >= 0");
  }
}

ReconstructionProblem ReconstructionProblem::for_slopes(const FractalOperator& fractal, const Pupil& pupil,
                                                        const SlopeSet& slopes) {
  slopes.validate(pupil);
  std::vector<double> weights(slopes.variance.size());
  std::transform(slopes.variance.begin(), slopes.variance.end(), weights.begin(), [](double v) { return 1.0 / v; });
  return ReconstructionProblem(fractal, pupil, std::move(weights));
}

ReconstructionProblem::Workspace ReconstructionProblem::make_workspace() const {
  return {std::vector<double>(size()), std::vector<double>(pupil_->data_count())};
}

void ReconstructionProblem::apply_A_w(std::span<const double> w, std::span<double> out, Workspace& ws,
                                      FlopCounter* flops) const {
  check_size(w, size(), "A_w input");
  check_size(out, size(), "A_w output");
  // Likelihood: S^T C^-1 S w
  apply_sensor(w, *pupil_, ws.slopes, flops);
  for (std::size_t k = 0; k < ws.slopes.size(); ++k) ws.slopes[k] *= inverse_variance_[k];
  if (flops) flops->noise += ws.slopes.size();
  apply_sensor_transpose(ws.slopes, *pupil_, out, flops);
  // Regularisation: K^-T K^-1 w
  std::copy(w.begin(), w.end(), ws.grid.begin());
  fractal_->apply_inverse(ws.grid, flops);
  fractal_->apply_inverse_transpose(ws.grid, flops);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += ws.grid[i];
  if (flops) flops->vector += out.size();
}

void ReconstructionProblem::apply_A_u(std::span<const double> u, std::span<double> out, Workspace& ws,
                                      FlopCounter* flops) const {
  check_size(u, size(), "A_u input");
  check_size(out, size(), "A_u output");
  std::copy(u.begin(), u.end(), ws.grid.begin());
  fractal_->apply(ws.grid, flops);
  apply_sensor(ws.grid, *pupil_, ws.slopes, flops);
  for (std::size_t k = 0; k < ws.slopes.size(); ++k) ws.slopes[k] *= inverse_variance_[k];
  if (flops) flops->noise += ws.slopes.size();
  apply_sensor_transpose(ws.slopes, *pupil_, out, flops);
  fractal_->apply_transpose(out, flops);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += u[i];
  if (flops) flops->vector += out.size();
}

void ReconstructionProblem::apply(Space space, std::span<const double> x, std::span<double> out, Workspace& ws,
                                  FlopCounter* flops) const {
  if (space == Space::W) {
    apply_A_w(x, out, ws, flops);
  } else {
    apply_A_u(x, out, ws, flops);
  }
}

LinearOperator ReconstructionProblem::normal_operator(Space space) const {
  auto ws = std::make_shared<Workspace>(make_workspace());
  return [this, space, ws](std::span<const double> x, std::span<double> out, FlopCounter* flops) {
    apply(space, x, out, *ws, flops);
  };
}

std::vector<double> ReconstructionProblem::build_rhs(std::span<const double> slopes, Space space,
                                                     FlopCounter* flops) const {
  check_size(slopes, pupil_->data_count(), "slope vector");
  std::vector<double> weighted(slopes.size());
  for (std::size_t k = 0; k < slopes.size(); ++k) weighted[k] = inverse_variance_[k] * slopes[k];
  if (flops) flops->noise += weighted.size();
  std::vector<double> b(size());
  apply_sensor_transpose(weighted, *pupil_, b, flops);
  if (space == Space::U) fractal_->apply_transpose(b, flops);
  return b;
}

DiagonalProbe probe_diagonals(const LinearOperator& op, std::size_t size) {
  DiagonalProbe out;
  out.diagonal.resize(size);
  out.row_square_sums.resize(size);
  std::vector<double> basis(size, 0.0);
  std::vector<double> column(size);
  for (std::size_t i = 0; i < size; ++i) {
    basis[i] = 1.0;
    op(basis, column, nullptr);
    basis[i] = 0.0;
    out.diagonal[i] = column[i];
    // A is symmetric, so the squared norm of column i is that of row i.
    out.row_square_sums[i] = dot(column, column);
  }
  return out;
}

namespace {
DiagonalPreconditioner optimal_from(const DiagonalProbe& probe, Space space) {
  std::vector<double> q(probe.diagonal.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(probe.row_square_sums[i] > 0.0)) {
      throw ConstructionError("row " + std::to_string(i) + " of A has zero norm");
    }
    q[i] = probe.diagonal[i] / probe.row_square_sums[i];
  }
  return DiagonalPreconditioner::optimal(std::move(q), space);
}
}  // namespace

DiagonalPreconditioner build_jacobi(const LinearOperator& op, std::size_t size, Space space) {
  return DiagonalPreconditioner::jacobi(probe_diagonals(op, size).diagonal, space);
}

DiagonalPreconditioner build_optimal_diagonal(const LinearOperator& op, std::size_t size, Space space) {
  return optimal_from(probe_diagonals(op, size), space);
}

std::vector<double> u_space_diagonal(const ReconstructionProblem& problem) {
  const FractalOperator& k = problem.fractal();
  const Pupil& pupil = problem.pupil();
  const auto& weights = problem.inverse_variance();
  const int n = k.side();
  std::vector<double> grid(k.size(), 0.0);
  std::vector<double> diagonal(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    const SupportBox box = k.apply_to_basis(i, grid);
    double acc = 0.0;
    for (int iy = box.y0; iy < std::min(box.y1, n - 1); ++iy) {
      for (int ix = box.x0; ix < std::min(box.x1, n - 1); ++ix) {
        const long sub = pupil.subaperture_at(ix, iy);
        if (sub < 0) continue;
        const std::size_t i00 = static_cast<std::size_t>(iy) * n + static_cast<std::size_t>(ix);
        const double diag = grid[i00 + n + 1] - grid[i00];
        const double anti = grid[i00 + 1] - grid[i00 + n];
        const double dx = 0.5 * (diag + anti);
        const double dy = 0.5 * (diag - anti);
        acc += weights[2 * sub] * dx * dx + weights[2 * sub + 1] * dy * dy;
      }
    }
    diagonal[i] = 1.0 + acc;
    for (int y = box.y0; y <= box.y1; ++y) {
      std::fill_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * n + box.x0, box.x1 - box.x0 + 1, 0.0);
    }
  }
  return diagonal;
}

DiagonalPreconditioner build_preconditioner(const ReconstructionProblem& problem, Space space,
                                            PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::None:
      throw DomainError("no preconditioner to build for plain CG");
    case PreconditionerKind::Jacobi:
      if (space == Space::U) return DiagonalPreconditioner::jacobi(u_space_diagonal(problem), space);
      return build_jacobi(problem.normal_operator(space), problem.size(), space);
    case PreconditionerKind::OptimalDiagonal:
      return build_optimal_diagonal(problem.normal_operator(space), problem.size(), space);
  }
  throw DomainError("unknown preconditioner kind");
}

ConvergenceTrace pcg_solve(const LinearOperator& op, std::span<const double> rhs, std::span<double> x,
                           const SolverConfig& config, const DiagonalPreconditioner* preconditioner,
                           FlopCounter& flops, const IterateObserver& observer) {
  config.validate();
  const std::size_t n = rhs.size();
  check_size(x, n, "solution vector");
  if (preconditioner) check_size(preconditioner->values, n, "preconditioner");
  const auto count = [&flops](std::size_t v) { flops.vector += v; };

  std::vector<double> r(rhs.begin(), rhs.end());
  std::vector<double> z(preconditioner ? n : 0);
  std::vector<double> p(n, 0.0);
  std::vector<double> q(n);

  if (config.initial_guess == InitialGuess::Zero) {
    std::fill(x.begin(), x.end(), 0.0);
  } else {
    op(x, q, &flops);
    for (std::size_t i = 0; i < n; ++i) r[i] -= q[i];
    count(n);
  }

  const double bnorm = std::sqrt(dot(rhs, rhs));
  count(2 * n);
  double rr;
  if (config.initial_guess == InitialGuess::Zero) {
    rr = bnorm * bnorm;
  } else {
    rr = dot(r, r);
    count(2 * n);
  }

  ConvergenceTrace trace;
  double initial_variance = std::nan("");
  auto record = [&](int iter) {
    TraceRow row;
    row.iter = iter;
    row.flops = flops.total();
    row.rnorm = std::sqrt(rr);
    row.resid_var = std::nan("");
    row.resid_var_norm = std::nan("");
    row.strehl = std::nan("");
    if (observer) {
      if (auto stats = observer(x)) {
        if (iter == 0) initial_variance = stats->variance;
        row.resid_var = stats->variance;
        row.resid_var_norm = stats->variance / initial_variance;
        row.strehl = strehl(stats->variance);
      }
    }
    trace.rows.push_back(row);
  };
  record(0);

  const double threshold = config.tolerance * bnorm;
  double rho_previous = 0.0;
  int k = 0;
  trace.stop = StopReason::MaxIterations;
  while (k < config.max_iterations) {
    if (std::sqrt(rr) <= threshold) {
      trace.stop = StopReason::Tolerance;
      break;
    }
    double rho;
    std::span<const double> direction_source = r;
    if (preconditioner) {
      preconditioner->apply(r, z, &flops);
      rho = dot(r, z);
      count(2 * n);
      direction_source = z;
    } else {
      rho = rr;
    }
    if (rho == 0.0) {
      trace.stop = StopReason::ExactSolution;
      break;
    }
    if (k == 0) {
      std::copy(direction_source.begin(), direction_source.end(), p.begin());
    } else {
      const double beta = rho / rho_previous;
      for (std::size_t i = 0; i < n; ++i) p[i] = direction_source[i] + beta * p[i];
      count(2 * n);
    }
    op(p, q, &flops);
    const double curvature = dot(p, q);
    count(2 * n);
    if (!(curvature > 0.0)) {
      std::ostringstream os;
      os << "operator is not positive definite: p'Ap = " << curvature << " at iteration " << k;
      throw IndefiniteOperatorError(os.str(), curvature, k);
    }
    const double alpha = rho / curvature;
    for (std::size_t i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * q[i];
    count(4 * n);
    rr = dot(r, r);
    count(2 * n);
    rho_previous = rho;
    ++k;
    record(k);
  }
  trace.iterations = k;
  return trace;
}

Reconstruction reconstruct(const ReconstructionProblem& problem, std::span<const double> slopes,
                           const SolverConfig& config, const DiagonalPreconditioner* preconditioner,
                           const PhaseGrid* truth, std::span<const double> initial) {
  config.validate();
  const SolverVariant& variant = config.variant;
  if (variant.preconditioner == PreconditionerKind::None) {
    if (preconditioner) throw DomainError(variant.name() + " takes no preconditioner");
  } else {
    if (!preconditioner) throw DomainError(variant.name() + " requires a preconditioner");
    if (preconditioner->space != variant.space || preconditioner->kind != variant.preconditioner) {
      throw DomainError("preconditioner does not match " + variant.name());
    }
  }
  if (truth && truth->side() != problem.fractal().side()) throw ShapeError("reference wavefront has the wrong side");

  const FractalOperator& k = problem.fractal();
  const int scales = k.scales();
  Reconstruction out;
  std::vector<double> x(problem.size(), 0.0);
  if (config.initial_guess == InitialGuess::Provided) {
    check_size(initial, problem.size(), "initial guess");
    std::copy(initial.begin(), initial.end(), x.begin());
  }

  IterateObserver observer;
  std::vector<double> mapped;
  if (truth) {
    observer = [&](std::span<const double> iterate) -> std::optional<ResidualStats> {
      if (variant.space == Space::W) return residual_stats(iterate, truth->values(), problem.pupil());
      mapped.assign(iterate.begin(), iterate.end());
      k.apply(mapped);
      return residual_stats(mapped, truth->values(), problem.pupil());
    };
  }

  const std::vector<double> rhs = problem.build_rhs(slopes, variant.space, &out.flops);
  out.trace = pcg_solve(problem.normal_operator(variant.space), rhs, x, config, preconditioner, out.flops, observer);
  if (variant.space == Space::U) k.apply(x, &out.flops);
  out.estimate = PhaseGrid(scales, std::move(x));
  return out;
}

std::vector<double> dense_reference_solve(const ReconstructionProblem& problem, std::span<const double> slopes) {
  const std::size_t n = problem.size();
  if (n > 20000) throw DomainError("dense reference solve is limited to small grids");
  auto op = problem.normal_operator(Space::W);
  std::vector<double> a(n * n);
  std::vector<double> basis(n, 0.0);
  std::vector<double> column(n);
  for (std::size_t j = 0; j < n; ++j) {
    basis[j] = 1.0;
    op(basis, column, nullptr);
    basis[j] = 0.0;
    for (std::size_t i = 0; i < n; ++i) a[i * n + j] = column[i];
  }
  // Symmetrise away rounding before factoring.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a[i * n + j] + a[j * n + i]);
      a[i * n + j] = m;
      a[j * n + i] = m;
    }
  }
  // In-place Cholesky, lower triangle.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) throw IndefiniteOperatorError("dense normal matrix is not positive definite", d, 0);
    d = std::sqrt(d);
    a[j * n + j] = d;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / d;
    }
  }
  std::vector<double> y = problem.build_rhs(slopes, Space::W);
  for (std::size_t i = 0; i < n; ++i) {
    double s = y[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * y[k];
    y[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * y[k];
    y[i] = s / a[i * n + i];
  }
  return y;
}

}  // namespace frim
