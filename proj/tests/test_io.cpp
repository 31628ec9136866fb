#include <gtest/gtest.h>

#include <fstream>

#include "ternblend/config_io.hpp"
#include "ternblend/csv.hpp"
#include "ternblend/image.hpp"
#include "ternblend/snapshot_io.hpp"
#include "test_util.hpp"

using namespace ternblend;
namespace fs = std::filesystem;

namespace {

FieldPair uniform_pair(const GridSpec& g, double a, double b) {
  return {ScalarField(g, a), ScalarField(g, b)};
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Csv, ShortestFormRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(parse_double(fmt_double(v), "v"), v);
  }
  EXPECT_TRUE(std::isnan(parse_double("nan", "v")));
  EXPECT_THROW(parse_double("1.5x", "v"), std::runtime_error);
  EXPECT_THROW(parse_int<int>("", "v"), std::runtime_error);
}

TEST(Csv, ReadsHeaderAndRows) {
  const fs::path dir = testutil::scratch_dir("csv");
  std::ofstream(dir / "t.csv") << "x,y\r\n1,2\r\n\r\n3,4\n";
  const CsvTable t = read_csv(dir / "t.csv");
  EXPECT_EQ(t.header, (std::vector<std::string>{"x", "y"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][t.column("y")], "4");
  EXPECT_THROW(t.column("z"), std::runtime_error);
  std::ofstream(dir / "bad.csv") << "x,y\n1\n";
  EXPECT_THROW(read_csv(dir / "bad.csv"), std::runtime_error);
}

TEST(Snapshot, RoundTripIsBitExact) {
  const fs::path dir = testutil::scratch_dir("snap");
  const GridSpec g{12, 8, 40.0, 40.0};
  const FieldPair f{testutil::random_field(g, 1), testutil::random_field(g, 2)};
  write_snapshot(dir / "nested" / "f.snap", f);
  EXPECT_EQ(read_snapshot(dir / "nested" / "f.snap"), f);
  EXPECT_EQ(fs::file_size(dir / "nested" / "f.snap"), 8 + 8 + 2 * 8 * g.size());
}

TEST(Snapshot, RejectsForeignAndTruncatedFiles) {
  const fs::path dir = testutil::scratch_dir("snap_bad");
  std::ofstream(dir / "junk.snap") << "NOTASNAPSHOT....";
  EXPECT_THROW(read_snapshot(dir / "junk.snap"), std::runtime_error);
  const GridSpec g{8, 8, 40.0, 40.0};
  write_snapshot(dir / "ok.snap", uniform_pair(g, 0.3, 0.3));
  fs::resize_file(dir / "ok.snap", 100);
  EXPECT_THROW(read_snapshot(dir / "ok.snap"), std::runtime_error);
  EXPECT_THROW(read_snapshot(dir / "missing.snap"), std::runtime_error);
}

TEST(GibbsCsv, RoundTrip) {
  const fs::path dir = testutil::scratch_dir("gibbs");
  const std::vector<GibbsSample> trace{{0, 0.0, 2.816596537946141}, {1, 0.02, 2.81659}, {2, 0.04, -1e-20}};
  write_gibbs_csv(dir / "g.csv", trace);
  const auto back = read_gibbs_csv(dir / "g.csv");
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    EXPECT_EQ(back[k].step, trace[k].step);
    EXPECT_EQ(back[k].t, trace[k].t);
    EXPECT_EQ(back[k].gibbs, trace[k].gibbs);
  }
}

TEST(Render, PureAIsRed) {
  const RgbImage img = render_rgb(uniform_pair(GridSpec{4, 4, 1.0, 1.0}, 1.0, 0.0));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(img.at(x, y, 0), 255);
      EXPECT_EQ(img.at(x, y, 1), 0);
      EXPECT_EQ(img.at(x, y, 2), 0);
    }
}

TEST(Render, EquimolarIsGrey85) {
  const RgbImage img = render_rgb(uniform_pair(GridSpec{4, 4, 1.0, 1.0}, 1.0 / 3.0, 1.0 / 3.0));
  for (std::uint8_t v : img.pixels) EXPECT_EQ(v, 85);
}

TEST(Render, TopRowIsLargestY) {
  const GridSpec g{5, 6, 1.0, 1.0};
  FieldPair f = uniform_pair(g, 0.0, 0.5);
  for (int i = 0; i < g.nx; ++i) f.a(i, g.ny - 1) = 0.5;
  const RgbImage img = render_rgb(f);
  EXPECT_EQ(img.at(2, 0, 0), to_byte(0.5));
  EXPECT_EQ(img.at(2, g.ny - 1, 0), 0);
}

TEST(Render, ChannelSumsAndEightBitInvertibility) {
  const GridSpec g{16, 16, 1.0, 1.0};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FieldPair f = uniform_pair(g, 0.0, 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double a = u(rng), b = u(rng) * (1.0 - a);
    f.a[k] = a;
    f.b[k] = b;
  }
  const RgbImage img = render_rgb(f);
  for (int y = 0; y < g.ny; ++y) {
    for (int x = 0; x < g.nx; ++x) {
      const int s = img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2);
      EXPECT_GE(s, 254);
      EXPECT_LE(s, 256);
      EXPECT_LE(std::abs(f.a(x, g.ny - 1 - y) - img.at(x, y, 0) / 255.0), 1.0 / 510.0 + 1e-15);
    }
  }
}

TEST(Png, RoundTrip) {
  const fs::path dir = testutil::scratch_dir("png");
  RgbImage img(7, 5);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<std::uint8_t>(k * 37);
  write_png(dir / "x.png", img);
  EXPECT_EQ(read_png(dir / "x.png"), img);
  EXPECT_THROW(read_png(dir / "missing.png"), std::runtime_error);
}

TEST(Preprocess, VectorLengthAndScale) {
  const RgbImage img = render_rgb(uniform_pair(GridSpec{64, 64, 1.0, 1.0}, 1.0 / 3.0, 1.0 / 3.0));
  const std::vector<double> v = preprocess(img);
  ASSERT_EQ(v.size(), 120000u);
  for (double x : v) EXPECT_DOUBLE_EQ(x, 85.0 / 255.0);
}

TEST(Preprocess, HalvingAveragesTwoByTwoBlocks) {
  RgbImage img(400, 400);
  std::mt19937_64 rng(9);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  // Checkerboard in the red channel; random content elsewhere.
  for (int y = 0; y < 400; ++y)
    for (int x = 0; x < 400; ++x) img.at(x, y, 0) = (x + y) % 2 ? 255 : 0;
  const std::vector<double> v = preprocess(img, 200, 200);
  const std::size_t plane = 200 * 200;
  for (int y = 0; y < 200; ++y) {
    for (int x = 0; x < 200; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const double block = (img.at(2 * x, 2 * y, ch) + img.at(2 * x + 1, 2 * y, ch) +
                              img.at(2 * x, 2 * y + 1, ch) + img.at(2 * x + 1, 2 * y + 1, ch)) /
                             (4.0 * 255.0);
        ASSERT_NEAR(v[ch * plane + y * 200 + x], block, 1e-12);
      }
    }
  }
}

TEST(Preprocess, UpsamplingKeepsUniformImagesUniform) {
  RgbImage img(32, 32);
  std::fill(img.pixels.begin(), img.pixels.end(), 120);
  const RgbImage big = resample_bilinear(img, 200, 200);
  for (auto p : big.pixels) EXPECT_EQ(p, 120);
}

TEST(Config, RoundTripsSimConfig) {
  SimConfig cfg;
  cfg.grid.nx = 48;
  cfg.params.chi_ab = 0.004;
  cfg.rng_seed = 77;
  SimConfig back;
  read_into(to_json(cfg), "", back);
  EXPECT_EQ(to_json(back), to_json(cfg));
  EXPECT_EQ(back.rng_seed, 77u);
}

TEST(Config, ErrorsNameTheFieldPath) {
  SimConfig cfg;
  const json bad_key = json::parse(R"({"grid": {"nx": 32, "nz": 4}})");
  EXPECT_NE(message_of([&] { read_into(bad_key, "", cfg); }).find("grid.nz"), std::string::npos);
  const json bad_type = json::parse(R"({"params": {"chi_ab": "high"}})");
  EXPECT_NE(message_of([&] { read_into(bad_type, "", cfg); }).find("params.chi_ab"),
            std::string::npos);
  const json negative = json::parse(R"({"seed": -4})");
  EXPECT_THROW(read_into(negative, "", cfg), ConfigError);
  EXPECT_THROW(read_into(json::array(), "", cfg), ConfigError);
}

TEST(Config, MissingFileNamesThePath) {
  const std::string msg = message_of([] { load_json("/nonexistent/dir/cfg.json"); });
  EXPECT_NE(msg.find("/nonexistent/dir/cfg.json"), std::string::npos);
}

TEST(Config, ValidationFailuresBecomeConfigErrors) {
  SimConfig cfg;
  cfg.a0 = 0.7;
  cfg.b0 = 0.7;
  EXPECT_THROW(validate_config(cfg), ConfigError);
}
