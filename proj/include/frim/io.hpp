#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "frim/experiment.hpp"
#include "frim/metrics.hpp"
#include "frim/phase_grid.hpp"
#include "frim/sensor.hpp"
#include "frim/solver.hpp"

namespace frim {

// Grid files: "FRIM", u32 version = 1, u32 side n, then n*n little-endian
// float64 samples, row major.
void write_grid(const std::filesystem::path& file, const PhaseGrid& grid);
PhaseGrid read_grid(const std::filesystem::path& file);
/// Any odd square map, e.g. a structure-function map of side 2m + 1.
void write_square_map(const std::filesystem::path& file, int side, const std::vector<double>& values);

// CSV files start with one "# <comment>" line. Readers skip lines that begin
// with '#'.

/// isub,ix,iy,dx,dy,var. `var` is the variance shared by dx and dy.
void write_slopes_csv(const std::filesystem::path& file, const Pupil& pupil, const SlopeSet& slopes,
                      const std::string& comment);
/// Rows must list the pupil's subapertures in order.
SlopeSet read_slopes_csv(const std::filesystem::path& file, const Pupil& pupil);

/// iter,flops,rnorm,resid_var,resid_var_norm,strehl
void write_trace_csv(const std::filesystem::path& file, const ConvergenceTrace& trace, const std::string& comment);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& file);

/// r,D_measured,D_theory
void write_structure_csv(const std::filesystem::path& file, const StructureValidation& sf, const std::string& comment);

/// noise_std,method,iter,flops,resid_var,resid_var_norm,strehl (medians)
void write_curves_csv(const std::filesystem::path& file, const SimulationResult& result, const std::string& comment);

/// p,n,N,item,flops,flops_per_N,model_flops,seconds
void write_bench_csv(const std::filesystem::path& file, const std::vector<BenchRow>& rows, const std::string& comment);

/// Splits a CSV file into rows of fields, dropping comment and blank lines
/// and the first remaining line (the header), which must equal `header`.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file, const std::string& header);

}  // namespace frim
