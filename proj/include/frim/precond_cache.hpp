#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "frim/solver.hpp"

namespace frim {

/// FNV-1a digest of everything that determines A: fractal coefficients,
/// pupil geometry, noise weights and the unknown space.
std::uint64_t problem_fingerprint(const ReconstructionProblem& problem, Space space);

/// Keeps built diagonal preconditioners in memory and, when a directory is
/// given, on disk as `<fingerprint>-<kind>.frpc`. Safe to share between
/// threads.
class PreconditionerCache {
 public:
  PreconditionerCache() = default;
  explicit PreconditionerCache(std::filesystem::path directory);

  /// Cached preconditioner for (problem, space, kind), building it on a miss.
  DiagonalPreconditioner get(const ReconstructionProblem& problem, Space space, PreconditionerKind kind);

  std::size_t hits() const;
  std::size_t misses() const;

 private:
  std::optional<DiagonalPreconditioner> load(const std::filesystem::path& file) const;
  void store(const std::filesystem::path& file, const DiagonalPreconditioner& value) const;

  std::optional<std::filesystem::path> directory_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::uint64_t, int>, DiagonalPreconditioner> memory_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

void write_preconditioner(const std::filesystem::path& file, const DiagonalPreconditioner& value);
DiagonalPreconditioner read_preconditioner(const std::filesystem::path& file);

}  // namespace frim
