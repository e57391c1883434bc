#include "frim/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "frim/errors.hpp"

namespace frim {

static_assert(std::endian::native == std::endian::little, "grid files are written in host byte order");

namespace {

constexpr char kGridMagic[4] = {'F', 'R', 'I', 'M'};
constexpr std::uint32_t kGridVersion = 1;

std::ofstream open_out(const std::filesystem::path& file, std::ios::openmode mode = std::ios::out) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, mode | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& file) {
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

void comment_line(std::ostream& out, const std::string& comment) {
  std::string flat = comment;
  for (char& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  out << "# " << flat << '\n';
}

double to_double(const std::string& s, const std::filesystem::path& file) {
  if (s == "nan" || s == "NaN" || s == "-nan") return std::nan("");
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError(file.string() + ": bad number '" + s + "'");
  return v;
}

long to_long(const std::string& s, const std::filesystem::path& file) {
  long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw FormatError(file.string() + ": bad integer '" + s + "'");
  return v;
}

void write_map(const std::filesystem::path& file, std::uint32_t side, const double* values, std::size_t count) {
  auto out = open_out(file, std::ios::binary);
  out.write(kGridMagic, 4);
  out.write(reinterpret_cast<const char*>(&kGridVersion), sizeof kGridVersion);
  out.write(reinterpret_cast<const char*>(&side), sizeof side);
  out.write(reinterpret_cast<const char*>(values), static_cast<std::streamsize>(count * sizeof(double)));
  finish(out, file);
}

}  // namespace

void write_grid(const std::filesystem::path& file, const PhaseGrid& grid) {
  write_map(file, static_cast<std::uint32_t>(grid.side()), grid.values().data(), grid.size());
}

void write_square_map(const std::filesystem::path& file, int side, const std::vector<double>& values) {
  if (side < 1 || values.size() != static_cast<std::size_t>(side) * static_cast<std::size_t>(side)) {
    throw ShapeError("map does not have side^2 values");
  }
  write_map(file, static_cast<std::uint32_t>(side), values.data(), values.size());
}

PhaseGrid read_grid(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError("cannot open " + file.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint32_t side = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&side), sizeof side);
  if (!in || std::memcmp(magic, kGridMagic, 4) != 0) throw FormatError(file.string() + ": not a grid file");
  if (version != kGridVersion) throw FormatError(file.string() + ": unsupported grid version " + std::to_string(version));
  const int scales = PhaseGrid::scales_for_side(static_cast<int>(side));
  std::vector<double> values(static_cast<std::size_t>(side) * side);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw FormatError(file.string() + ": truncated grid payload");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(file.string() + ": trailing bytes after grid");
  return PhaseGrid(scales, std::move(values));
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& file, const std::string& header) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot open " + file.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!seen_header) {
      if (line != header) throw FormatError(file.string() + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  if (!seen_header) throw FormatError(file.string() + ": missing header");
  return rows;
}

void write_slopes_csv(const std::filesystem::path& file, const Pupil& pupil, const SlopeSet& slopes,
                      const std::string& comment) {
  slopes.validate(pupil);
  auto out = open_out(file);
  comment_line(out, comment);
  out << "isub,ix,iy,dx,dy,var\n";
  const auto& subs = pupil.subapertures();
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (slopes.variance[2 * i] != slopes.variance[2 * i + 1]) {
      throw DomainError("slope CSV holds one variance per subaperture");
    }
    out << i << ',' << subs[i].ix << ',' << subs[i].iy << ',' << slopes.values[2 * i] << ','
        << slopes.values[2 * i + 1] << ',' << slopes.variance[2 * i] << '\n';
  }
  finish(out, file);
}

SlopeSet read_slopes_csv(const std::filesystem::path& file, const Pupil& pupil) {
  const auto rows = read_csv(file, "isub,ix,iy,dx,dy,var");
  if (rows.size() != pupil.subaperture_count()) {
    throw ShapeError(file.string() + ": " + std::to_string(rows.size()) + " subapertures, pupil has " +
                     std::to_string(pupil.subaperture_count()));
  }
  SlopeSet out;
  const auto& subs = pupil.subapertures();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 6) throw FormatError(file.string() + ": row " + std::to_string(i) + " needs 6 fields");
    if (to_long(r[0], file) != static_cast<long>(i) || to_long(r[1], file) != subs[i].ix ||
        to_long(r[2], file) != subs[i].iy) {
      throw ShapeError(file.string() + ": row " + std::to_string(i) + " does not match the pupil geometry");
    }
    const double var = to_double(r[5], file);
    out.values.push_back(to_double(r[3], file));
    out.values.push_back(to_double(r[4], file));
    out.variance.push_back(var);
    out.variance.push_back(var);
  }
  out.validate(pupil);
  return out;
}

void write_trace_csv(const std::filesystem::path& file, const ConvergenceTrace& trace, const std::string& comment) {
  auto out = open_out(file);
  comment_line(out, comment);
  out << "iter,flops,rnorm,resid_var,resid_var_norm,strehl\n";
  for (const auto& row : trace.rows) {
    out << row.iter << ',' << row.flops << ',' << row.rnorm << ',' << row.resid_var << ',' << row.resid_var_norm << ','
        << row.strehl << '\n';
  }
  finish(out, file);
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& file) {
  std::vector<TraceRow> out;
  for (const auto& r : read_csv(file, "iter,flops,rnorm,resid_var,resid_var_norm,strehl")) {
    if (r.size() != 6) throw FormatError(file.string() + ": trace rows need 6 fields");
    TraceRow row;
    row.iter = static_cast<int>(to_long(r[0], file));
    row.flops = static_cast<std::uint64_t>(to_long(r[1], file));
    row.rnorm = to_double(r[2], file);
    row.resid_var = to_double(r[3], file);
    row.resid_var_norm = to_double(r[4], file);
    row.strehl = to_double(r[5], file);
    out.push_back(row);
  }
  return out;
}

void write_structure_csv(const std::filesystem::path& file, const StructureValidation& sf, const std::string& comment) {
  auto out = open_out(file);
  comment_line(out, comment);
  out << "r,D_measured,D_theory\n";
  for (std::size_t i = 0; i < sf.estimate.profile.size(); ++i) {
    const auto& bin = sf.estimate.profile[i];
    out << bin.radius << ',' << bin.value << ',' << sf.theory[i] << '\n';
  }
  finish(out, file);
}

void write_curves_csv(const std::filesystem::path& file, const SimulationResult& result, const std::string& comment) {
  auto out = open_out(file);
  comment_line(out, comment);
  out << "noise_std,method,iter,flops,resid_var,resid_var_norm,strehl\n";
  for (const auto& curve : result.curves) {
    for (const auto& pt : curve.median) {
      out << curve.noise_std << ',' << curve.variant.name() << ',' << pt.iter << ',' << pt.flops << ','
          << pt.resid_var << ',' << pt.resid_var_norm << ',' << pt.strehl << '\n';
    }
  }
  finish(out, file);
}

void write_bench_csv(const std::filesystem::path& file, const std::vector<BenchRow>& rows, const std::string& comment) {
  auto out = open_out(file);
  comment_line(out, comment);
  out << "p,n,N,item,flops,flops_per_N,model_flops,seconds\n";
  for (const auto& r : rows) {
    out << r.scales << ',' << r.side << ',' << r.unknowns << ',' << r.item << ',' << r.flops << ','
        << r.flops_per_unknown << ',' << r.model_flops << ',' << r.seconds << '\n';
  }
  finish(out, file);
}

}  // namespace frim
