#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frim/flops.hpp"
#include "frim/fractal.hpp"
#include "frim/metrics.hpp"
#include "frim/phase_grid.hpp"
#include "frim/sensor.hpp"

namespace frim {

/// Unknowns of the normal equations: wavefront samples w or generators
/// u = K^-1 w.
enum class Space { W, U };

enum class PreconditionerKind { None, Jacobi, OptimalDiagonal };

struct SolverVariant {
  Space space = Space::U;
  PreconditionerKind preconditioner = PreconditionerKind::OptimalDiagonal;

  /// One of w-cg, w-pcg-jac, w-pcg-opt, u-cg, u-pcg-jac, u-pcg-opt.
  std::string name() const;
  static SolverVariant parse(std::string_view name);
  static std::array<SolverVariant, 6> all();

  friend bool operator==(const SolverVariant&, const SolverVariant&) = default;
};

enum class InitialGuess { Zero, Provided };

struct SolverConfig {
  SolverVariant variant;
  int max_iterations = 30;
  /// Stop once ||r_k|| <= tolerance ||b||.
  double tolerance = 1e-3;
  InitialGuess initial_guess = InitialGuess::Zero;

  /// Throws DomainError unless max_iterations >= 1 and tolerance > 0.
  void validate() const;
};

/// Diagonal preconditioner, either M = diag(m) ~ A (z = r / m) or
/// Q = diag(q) ~ A^-1 (z = q r).
struct DiagonalPreconditioner {
  enum class Form { Approximation, InverseApproximation };

  PreconditionerKind kind = PreconditionerKind::Jacobi;
  Form form = Form::Approximation;
  Space space = Space::W;
  std::vector<double> values;

  /// Throws ConstructionError unless every entry is finite and positive.
  static DiagonalPreconditioner jacobi(std::vector<double> diagonal, Space space);
  static DiagonalPreconditioner optimal(std::vector<double> q, Space space);

  void apply(std::span<const double> r, std::span<double> z, FlopCounter* flops = nullptr) const;
};

/// y = A x. Implementations add their own cost to the counter.
using LinearOperator = std::function<void(std::span<const double>, std::span<double>, FlopCounter*)>;

/// The regularised normal equations
///   W space: (S^T C^-1 S + K^-T K^-1) w = S^T C^-1 d
///   U space: (K^T S^T C^-1 S K + I) u = K^T S^T C^-1 d
/// applied matrix-free. Holds references to the fractal operator and the
/// pupil, which must outlive it.
class ReconstructionProblem {
 public:
  ReconstructionProblem(const FractalOperator& fractal, const Pupil& pupil, std::vector<double> inverse_variance);

  /// Weights 1 / Var(n) from a validated slope set.
  static ReconstructionProblem for_slopes(const FractalOperator& fractal, const Pupil& pupil, const SlopeSet& slopes);

  std::size_t size() const noexcept { return fractal_->size(); }
  const FractalOperator& fractal() const noexcept { return *fractal_; }
  const Pupil& pupil() const noexcept { return *pupil_; }
  const std::vector<double>& inverse_variance() const noexcept { return inverse_variance_; }

  struct Workspace {
    std::vector<double> grid;
    std::vector<double> slopes;
  };
  Workspace make_workspace() const;

  void apply_A_w(std::span<const double> w, std::span<double> out, Workspace& ws, FlopCounter* flops = nullptr) const;
  void apply_A_u(std::span<const double> u, std::span<double> out, Workspace& ws, FlopCounter* flops = nullptr) const;
  void apply(Space space, std::span<const double> x, std::span<double> out, Workspace& ws,
             FlopCounter* flops = nullptr) const;

  /// Matrix-free A for `space` with its own scratch buffers.
  LinearOperator normal_operator(Space space) const;

  /// b = S^T C^-1 d (W) or K^T S^T C^-1 d (U).
  std::vector<double> build_rhs(std::span<const double> slopes, Space space, FlopCounter* flops = nullptr) const;

 private:
  const FractalOperator* fractal_;
  const Pupil* pupil_;
  std::vector<double> inverse_variance_;
};

struct DiagonalProbe {
  std::vector<double> diagonal;          // A_ii
  std::vector<double> row_square_sums;   // sum_j A_ij^2 = ||A e_i||^2
};

/// Applies A to every basis vector: O(N) applications, O(N^2) work.
DiagonalProbe probe_diagonals(const LinearOperator& op, std::size_t size);

DiagonalPreconditioner build_jacobi(const LinearOperator& op, std::size_t size, Space space);
DiagonalPreconditioner build_optimal_diagonal(const LinearOperator& op, std::size_t size, Space space);

/// diag(A_u)_i = 1 + ||C^-1/2 S K e_i||^2 using the bounded support of each
/// column of K. O(N log N).
std::vector<double> u_space_diagonal(const ReconstructionProblem& problem);

/// Preconditioner of `kind` for the problem in `space`. U-space Jacobi uses
/// u_space_diagonal; everything else probes basis vectors.
DiagonalPreconditioner build_preconditioner(const ReconstructionProblem& problem, Space space,
                                            PreconditionerKind kind);

struct TraceRow {
  int iter = 0;
  std::uint64_t flops = 0;
  double rnorm = 0.0;
  double resid_var = 0.0;       // NaN without a reference wavefront
  double resid_var_norm = 0.0;  // resid_var / resid_var at iteration 0
  double strehl = 0.0;
};

enum class StopReason { Tolerance, MaxIterations, ExactSolution };

struct ConvergenceTrace {
  std::vector<TraceRow> rows;  // iteration 0 included
  int iterations = 0;
  StopReason stop = StopReason::MaxIterations;
};

/// Optional per-iterate diagnostic; its cost is not charged to the counter.
using IterateObserver = std::function<std::optional<ResidualStats>(std::span<const double>)>;

/// Preconditioned conjugate gradients. `x` holds the initial guess on entry
/// (ignored and zeroed for InitialGuess::Zero) and the solution on exit.
/// Throws IndefiniteOperatorError if p'Ap <= 0.
ConvergenceTrace pcg_solve(const LinearOperator& op, std::span<const double> rhs, std::span<double> x,
                           const SolverConfig& config, const DiagonalPreconditioner* preconditioner,
                           FlopCounter& flops, const IterateObserver& observer = {});

struct Reconstruction {
  PhaseGrid estimate;  // w, piston included
  ConvergenceTrace trace;
  FlopCounter flops;
};

/// End-to-end solve for the variant in `config`. U-space variants map the
/// converged generators back through K. `truth`, when given, fills the
/// residual columns of the trace. `preconditioner` must match the variant.
Reconstruction reconstruct(const ReconstructionProblem& problem, std::span<const double> slopes,
                           const SolverConfig& config, const DiagonalPreconditioner* preconditioner,
                           const PhaseGrid* truth = nullptr, std::span<const double> initial = {});

/// Exact W-space solution by assembling A densely and factoring it with
/// Cholesky. Only sensible for tiny grids.
std::vector<double> dense_reference_solve(const ReconstructionProblem& problem, std::span<const double> slopes);

}  // namespace frim
