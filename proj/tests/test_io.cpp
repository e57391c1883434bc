#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "frim/errors.hpp"
#include "frim/io.hpp"
#include "frim/precond_cache.hpp"
#include "frim/random.hpp"

namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("frim_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                                 "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

}  // namespace

TEST(GridFile, RoundTripIsBitExact) {
  TempDir dir;
  frim::PhaseGrid g(4);
  frim::NormalRng(21).fill(g.values());
  g(0, 0) = -0.0;
  g(3, 7) = 1e-310;
  write_grid(dir / "g.bin", g);
  EXPECT_EQ(fs::file_size(dir / "g.bin"), 12u + 17u * 17u * 8u);
  const auto back = frim::read_grid(dir / "g.bin");
  ASSERT_EQ(back.side(), 17);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(std::memcmp(&g.values()[i], &back.values()[i], sizeof(double)), 0);
  }
  EXPECT_EQ(slurp(dir / "g.bin").substr(0, 4), "FRIM");
}

TEST(GridFile, RejectsMalformedFiles) {
  TempDir dir;
  frim::PhaseGrid g(2);
  write_grid(dir / "g.bin", g);
  const std::string good = slurp(dir / "g.bin");

  EXPECT_THROW(frim::read_grid(dir / "missing.bin"), frim::FormatError);
  spit(dir / "magic.bin", "FRIX" + good.substr(4));
  EXPECT_THROW(frim::read_grid(dir / "magic.bin"), frim::FormatError);
  std::string version = good;
  version[4] = 2;
  spit(dir / "version.bin", version);
  EXPECT_THROW(frim::read_grid(dir / "version.bin"), frim::FormatError);
  spit(dir / "short.bin", good.substr(0, good.size() - 1));
  EXPECT_THROW(frim::read_grid(dir / "short.bin"), frim::FormatError);
  spit(dir / "long.bin", good + "x");
  EXPECT_THROW(frim::read_grid(dir / "long.bin"), frim::FormatError);
  std::string side = good;
  side[8] = 6;  // 6 is not 2^p + 1
  spit(dir / "side.bin", side);
  EXPECT_ANY_THROW(frim::read_grid(dir / "side.bin"));
}

TEST(SlopesCsv, RoundTrip) {
  TempDir dir;
  const auto pupil = frim::Pupil::annular(17);
  frim::PhaseGrid truth(4);
  frim::NormalRng(5).fill(truth.values());
  const auto slopes = frim::simulate_measurements(truth, pupil, 0.3, 77);
  frim::write_slopes_csv(dir / "s.csv", pupil, slopes, "noise_std=0.3");
  const std::string text = slurp(dir / "s.csv");
  EXPECT_EQ(text.rfind("# noise_std=0.3\nisub,ix,iy,dx,dy,var\n", 0), 0u);
  const auto back = frim::read_slopes_csv(dir / "s.csv", pupil);
  EXPECT_EQ(back.values, slopes.values);
  EXPECT_EQ(back.variance, slopes.variance);
}

TEST(SlopesCsv, RejectsMismatchedGeometry) {
  TempDir dir;
  const auto pupil = frim::Pupil::annular(17);
  const frim::SlopeSet slopes{std::vector<double>(pupil.data_count(), 0.5),
                              std::vector<double>(pupil.data_count(), 1.0)};
  frim::write_slopes_csv(dir / "s.csv", pupil, slopes, "x");
  EXPECT_THROW(frim::read_slopes_csv(dir / "s.csv", frim::Pupil::annular(33)), frim::ShapeError);

  std::string text = slurp(dir / "s.csv");
  spit(dir / "bad.csv", text.substr(0, text.rfind('\n', text.size() - 2) + 1) + "9999,0,0,nope,1,1\n");
  EXPECT_THROW(frim::read_slopes_csv(dir / "bad.csv", pupil), frim::ShapeError);
  std::string number = text;
  number.replace(number.find(",0.5,"), 5, ",nope,");
  spit(dir / "number.csv", number);
  EXPECT_THROW(frim::read_slopes_csv(dir / "number.csv", pupil), frim::FormatError);
  spit(dir / "hdr.csv", "# c\nisub,dx,dy\n");
  EXPECT_THROW(frim::read_slopes_csv(dir / "hdr.csv", pupil), frim::FormatError);
}

TEST(TraceCsv, RoundTripKeepsNan) {
  TempDir dir;
  frim::ConvergenceTrace trace;
  trace.rows = {{0, 0, 2.5, std::nan(""), std::nan(""), std::nan("")},
                {1, 12345, 0.125, 0.75, 0.3, std::exp(-0.75)}};
  trace.iterations = 1;
  frim::write_trace_csv(dir / "t.csv", trace, "method=u-pcg-opt");
  const auto rows = frim::read_trace_csv(dir / "t.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(std::isnan(rows[0].resid_var));
  EXPECT_EQ(rows[0].rnorm, 2.5);
  EXPECT_EQ(rows[1].flops, 12345u);
  EXPECT_EQ(rows[1].strehl, std::exp(-0.75));
}

TEST(Csv, SkipsCommentsAndBlankLines) {
  TempDir dir;
  spit(dir / "c.csv", "# one\n\na,b\n# two\n1,2\n\n3,4\n");
  const auto rows = frim::read_csv(dir / "c.csv", "a,b");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1], (std::vector<std::string>{"3", "4"}));
  EXPECT_THROW(frim::read_csv(dir / "c.csv", "a,c"), frim::FormatError);
}

TEST(PreconditionerFile, RoundTripAndValidation) {
  TempDir dir;
  auto q = frim::DiagonalPreconditioner::optimal({0.5, 0.25, 3.0}, frim::Space::U);
  frim::write_preconditioner(dir / "p.frpc", q);
  const auto back = frim::read_preconditioner(dir / "p.frpc");
  EXPECT_EQ(back.values, q.values);
  EXPECT_EQ(back.kind, frim::PreconditionerKind::OptimalDiagonal);
  EXPECT_EQ(back.space, frim::Space::U);
  EXPECT_EQ(back.form, frim::DiagonalPreconditioner::Form::InverseApproximation);
  const std::string text = slurp(dir / "p.frpc");
  spit(dir / "short.frpc", text.substr(0, text.size() - 3));
  EXPECT_ANY_THROW(frim::read_preconditioner(dir / "short.frpc"));
}
