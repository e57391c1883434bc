#include "frim/precond_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "frim/errors.hpp"

namespace frim {

namespace {

constexpr char kMagic[4] = {'F', 'R', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;

class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void value(double v) { bytes(&v, sizeof v); }
  void value(std::uint64_t v) { bytes(&v, sizeof v); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw FormatError("truncated preconditioner file");
  return v;
}

}  // namespace

std::uint64_t problem_fingerprint(const ReconstructionProblem& problem, Space space) {
  Fnv1a h;
  const FractalOperator& k = problem.fractal();
  h.value(static_cast<std::uint64_t>(k.scales()));
  h.value(static_cast<std::uint64_t>(space == Space::W ? 0 : 1));
  for (const auto& row : k.outer().forward) {
    for (double v : row) h.value(v);
  }
  for (const auto& level : k.levels()) {
    h.value(static_cast<std::uint64_t>(level.step));
    h.value(level.square.gain);
    h.value(level.square.side);
    h.value(level.triangle.gain);
    h.value(level.triangle.edge);
    h.value(level.triangle.interior);
    h.value(level.diamond.gain);
    h.value(level.diamond.side);
  }
  for (const auto& s : problem.pupil().subapertures()) {
    h.value(static_cast<std::uint64_t>(s.ix));
    h.value(static_cast<std::uint64_t>(s.iy));
  }
  for (double w : problem.inverse_variance()) h.value(w);
  return h.digest();
}

void write_preconditioner(const std::filesystem::path& file, const DiagonalPreconditioner& value) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(value.kind));
  put<std::uint32_t>(out, value.space == Space::W ? 0U : 1U);
  put<std::uint64_t>(out, value.values.size());
  for (double v : value.values) put<double>(out, v);
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

DiagonalPreconditioner read_preconditioner(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(file.string() + ": not a preconditioner file");
  if (take<std::uint32_t>(in) != kVersion) throw FormatError(file.string() + ": unsupported version");
  const auto kind = take<std::uint32_t>(in);
  const auto space = take<std::uint32_t>(in) == 0 ? Space::W : Space::U;
  const auto count = take<std::uint64_t>(in);
  std::vector<double> values(count);
  for (auto& v : values) v = take<double>(in);
  switch (static_cast<PreconditionerKind>(kind)) {
    case PreconditionerKind::Jacobi: return DiagonalPreconditioner::jacobi(std::move(values), space);
    case PreconditionerKind::OptimalDiagonal: return DiagonalPreconditioner::optimal(std::move(values), space);
    default: throw FormatError(file.string() + ": bad preconditioner kind");
  }
}

PreconditionerCache::PreconditionerCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(*directory_);
}

std::optional<DiagonalPreconditioner> PreconditionerCache::load(const std::filesystem::path& file) const {
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    return read_preconditioner(file);
  } catch (const std::exception&) {
    return std::nullopt;  // stale or corrupt entry; rebuild
  }
}

void PreconditionerCache::store(const std::filesystem::path& file, const DiagonalPreconditioner& value) const {
  const auto tmp = file.string() + ".tmp";
  write_preconditioner(tmp, value);
  std::filesystem::rename(tmp, file);
}

DiagonalPreconditioner PreconditionerCache::get(const ReconstructionProblem& problem, Space space,
                                                PreconditionerKind kind) {
  const auto key = std::make_pair(problem_fingerprint(problem, space), static_cast<int>(kind));
  std::lock_guard lock(mutex_);
  if (auto it = memory_.find(key); it != memory_.end()) {
    ++hits_;
    return it->second;
  }
  std::optional<std::filesystem::path> file;
  if (directory_) {
    std::ostringstream name;
    name << std::hex << key.first << '-' << key.second << ".frpc";
    file = *directory_ / name.str();
    if (auto loaded = load(*file); loaded && loaded->values.size() == problem.size() && loaded->space == space &&
                                   loaded->kind == kind) {
      ++hits_;
      return memory_.emplace(key, std::move(*loaded)).first->second;
    }
  }
  ++misses_;
  DiagonalPreconditioner built = build_preconditioner(problem, space, kind);
  if (file) store(*file, built);
  return memory_.emplace(key, std::move(built)).first->second;
}

std::size_t PreconditionerCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t PreconditionerCache::misses() const {
  std::lock_guard lock(mutex_);
  return misses_;
}

}  // namespace frim
