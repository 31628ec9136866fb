#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <set>

#include "ternblend/sweep.hpp"
#include "test_util.hpp"

using namespace ternblend;
namespace fs = std::filesystem;

namespace {

SweepSpec tiny_spec(const fs::path& out) {
  SweepSpec s;
  s.a0_values = {0.2, 0.4};
  s.b0_values = {0.3, 0.35};
  s.chi_cases = {{0.009, 0.009, 0.009}};
  s.base.grid = GridSpec{16, 16, 40.0, 40.0};
  s.base.t_end = 1.0;
  s.out_dir = out;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Plan, CartesianProductWithMargin) {
  SweepSpec s = tiny_spec("unused");
  std::vector<SkippedPoint> skipped;
  EXPECT_EQ(plan_sweep(s, &skipped).size(), 4u);
  EXPECT_TRUE(skipped.empty());
  s.a0_values = {0.5};
  s.b0_values = {0.5, 0.2};
  s.chi_cases.push_back({0.0, 0.0, 0.0});
  const auto plan = plan_sweep(s, &skipped);
  EXPECT_EQ(plan.size(), 2u);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].a0, 0.5);
  EXPECT_EQ(skipped[0].b0, 0.5);
}

TEST(Plan, RejectsBadSpecs) {
  SweepSpec s = tiny_spec("unused");
  s.chi_cases = {{0.03, 0.0, 0.0}};
  EXPECT_THROW(plan_sweep(s, nullptr), std::invalid_argument);
  s = tiny_spec("unused");
  s.a0_values = {0.2, 0.20001};
  EXPECT_THROW(plan_sweep(s, nullptr), std::invalid_argument);
  s = tiny_spec("unused");
  s.b0_values.clear();
  EXPECT_THROW(plan_sweep(s, nullptr), std::invalid_argument);
}

TEST(Plan, SeedsAreReproducibleAndDistinct) {
  const ChiCase chi{0.003, 0.003, 0.003};
  EXPECT_EQ(run_seed(0, 0.2, 0.3, chi), run_seed(0, 0.2, 0.3, chi));
  std::set<std::uint64_t> seeds;
  for (double a : {0.1, 0.2, 0.3})
    for (double b : {0.1, 0.2})
      for (std::uint64_t base : {0ULL, 1ULL}) seeds.insert(run_seed(base, a, b, chi));
  EXPECT_EQ(seeds.size(), 12u);
  EXPECT_EQ(make_run_id(0.2, 0.35, chi), "a0.2000_b0.3500_x0.0030-0.0030-0.0030");
}

TEST(Manifest, RoundTrip) {
  const fs::path dir = testutil::scratch_dir("manifest");
  RunRecord ok;
  ok.run_id = "r1";
  ok.a0 = 0.2;
  ok.b0 = 1.0 / 3.0;
  ok.chi_ab = ok.chi_ac = ok.chi_bc = 0.009;
  ok.n_a = ok.n_b = ok.n_c = 1000;
  ok.seed = 18446744073709551615ULL;
  ok.state_id = StateID::State3b;
  ok.gibbs_first = 2.5;
  ok.gibbs_last = 2.25;
  ok.snapshot_path = "runs/r1/final.snap";
  ok.image_path = "runs/r1/final.png";
  RunRecord failed = ok;
  failed.run_id = "r2";
  failed.error = "boom";
  failed.state_id = StateID::State3a;
  failed.snapshot_path.clear();
  failed.image_path.clear();
  write_manifest(dir / "manifest.csv", {ok, failed});
  const auto back = read_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(manifest_row(back[0]), manifest_row(ok));
  EXPECT_FALSE(back[1].error.empty());
  EXPECT_FALSE(back[1].eligible());
  EXPECT_TRUE(back[0].eligible());
  std::ofstream(dir / "wrong.csv") << "id,a0\nx,0.1\n";
  EXPECT_THROW(read_manifest(dir / "wrong.csv"), std::runtime_error);
}

TEST(Sweep, ParallelMatchesSerialByteForByte) {
  const fs::path serial_dir = testutil::scratch_dir("sweep_serial");
  const fs::path parallel_dir = testutil::scratch_dir("sweep_parallel");
  SweepSpec s = tiny_spec(serial_dir);
  std::size_t calls = 0;
  const SweepOutcome a = run_sweep(s, [&](const RunRecord&, std::size_t done, std::size_t total) {
    ++calls;
    EXPECT_LE(done, total);
  });
  EXPECT_EQ(calls, 4u);
  s.out_dir = parallel_dir;
  s.parallelism = 3;
  const SweepOutcome b = run_sweep(s);
  ASSERT_EQ(a.records.size(), 4u);
  EXPECT_EQ(slurp(serial_dir / "manifest.csv"), slurp(parallel_dir / "manifest.csv"));
  for (const RunRecord& r : a.records) {
    ASSERT_TRUE(r.error.empty()) << r.error;
    EXPECT_TRUE(fs::exists(serial_dir / r.snapshot_path));
    EXPECT_TRUE(fs::exists(serial_dir / r.image_path));
    EXPECT_EQ(slurp(serial_dir / r.snapshot_path), slurp(parallel_dir / r.snapshot_path));
    EXPECT_EQ(slurp(serial_dir / r.image_path), slurp(parallel_dir / r.image_path));
  }
  EXPECT_TRUE(std::is_sorted(a.records.begin(), a.records.end(),
                             [](const auto& x, const auto& y) { return x.run_id < y.run_id; }));
}

TEST(Sweep, DivergenceAndFailuresAreRecordedNotThrown) {
  const fs::path dir = testutil::scratch_dir("sweep_fail");
  SweepSpec s = tiny_spec(dir);
  s.a0_values = {0.003, 0.3};  // 0.003 cannot host the initial noise
  s.b0_values = {0.3};
  s.base.newton_max_iter = 1;  // the implicit iteration cannot converge
  const SweepOutcome out = run_sweep(s);
  ASSERT_EQ(out.records.size(), 2u);
  for (const RunRecord& r : out.records) EXPECT_EQ(r.state_id, StateID::State3a);
  const auto back = read_manifest(dir / "manifest.csv");
  EXPECT_FALSE(out.records[0].error.empty());
  EXPECT_TRUE(back[0].snapshot_path.empty());
  EXPECT_TRUE(out.records[1].error.empty());
}

TEST(Sweep, SkippedPointsAreLogged) {
  const fs::path dir = testutil::scratch_dir("sweep_skip");
  SweepSpec s = tiny_spec(dir);
  s.a0_values = {0.5};
  s.b0_values = {0.5};
  const SweepOutcome out = run_sweep(s);
  EXPECT_TRUE(out.records.empty());
  EXPECT_EQ(slurp(dir / "skipped.csv"), "a0,b0,reason\n0.5,0.5,a0 + b0 >= 0.95\n");
  EXPECT_EQ(slurp(dir / "manifest.csv"), std::string(kManifestHeader) + "\n");
}

TEST(SpecJson, RoundTripAndErrors) {
  SweepSpec s = tiny_spec("out_here");
  s.base_seed = 9;
  const SweepSpec back = sweep_spec_from_json(to_json(s));
  EXPECT_EQ(to_json(back), to_json(s));
  json j = to_json(s);
  j["chi_cases"] = json::array({json::array({0.1, 0.2})});
  EXPECT_THROW(sweep_spec_from_json(j), ConfigError);
  j = to_json(s);
  j["unknown"] = 1;
  EXPECT_THROW(sweep_spec_from_json(j), ConfigError);
  j = to_json(s);
  j.erase("a0_values");
  EXPECT_THROW(sweep_spec_from_json(j), ConfigError);
}
