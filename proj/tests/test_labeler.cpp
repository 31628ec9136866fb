#include <gtest/gtest.h>

#include "ternblend/labeler.hpp"
#include "ternblend/pipeline.hpp"
#include "test_util.hpp"

using namespace ternblend;

namespace {

const GridSpec kGrid{32, 32, 40.0, 40.0};

FieldPair filled(double a, double b) { return {ScalarField(kGrid, a), ScalarField(kGrid, b)}; }

void paint(FieldPair& f, int i, int j, double a, double b) {
  f.a(i, j) = a;
  f.b(i, j) = b;
}

}  // namespace

TEST(Labeler, PatternFreeFieldIsUniform) {
  FieldPair f = filled(0.5, 0.2);
  f.a = testutil::random_field(kGrid, 1, 0.49, 0.51);
  const MorphologyLabel l = label_morphology(f);
  EXPECT_EQ(l.structure, Structure::Uniform);
  EXPECT_EQ(l.continuous, 0);
  EXPECT_EQ(l.name(), "A-uniform");
}

TEST(Labeler, IsolatedDropletsInAMatrix) {
  FieldPair f = filled(0.8, 0.1);
  for (int ci : {6, 22})
    for (int cj : {6, 22})
      for (int j = cj - 3; j <= cj + 3; ++j)
        for (int i = ci - 3; i <= ci + 3; ++i) paint(f, i, j, 0.1, 0.8);
  const MorphologyLabel l = label_morphology(f);
  EXPECT_EQ(l.continuous, 0);
  EXPECT_EQ(l.structure, Structure::Dispersed);
}

TEST(Labeler, InterpenetratingStripesAreBicontinuous) {
  FieldPair f = filled(0.1, 0.8);
  for (int j = 0; j < kGrid.ny; ++j)
    for (int i = 0; i < kGrid.nx; ++i)
      if (i % 8 < 5) paint(f, i, j, 0.8, 0.1);
  const MorphologyLabel l = label_morphology(f);
  EXPECT_EQ(l.continuous, 0);
  EXPECT_EQ(l.structure, Structure::Bicontinuous);
}

TEST(Labeler, BandWrappingThePeriodicAxisPercolates) {
  FieldPair f = filled(0.1, 0.1);  // C matrix
  for (int j = 10; j < 14; ++j)
    for (int i = 0; i < kGrid.nx; ++i) paint(f, i, j, 0.1, 0.8);
  const MorphologyLabel l = label_morphology(f);
  EXPECT_EQ(l.continuous, 2);
  EXPECT_EQ(l.structure, Structure::Bicontinuous);
  EXPECT_EQ(l.id(), 7);
}

TEST(Labeler, DropletTouchingOneWallDoesNotPercolate) {
  FieldPair f = filled(0.1, 0.8);
  for (int j = 0; j < 10; ++j)
    for (int i = 10; i < 16; ++i) paint(f, i, j, 0.8, 0.1);
  EXPECT_EQ(label_morphology(f).structure, Structure::Dispersed);
  EXPECT_EQ(label_morphology(f).continuous, 1);
}

TEST(Labeler, Names) {
  EXPECT_EQ(label_name(0), "A-dispersed");
  EXPECT_EQ(label_name(4), "B-bicontinuous");
  EXPECT_EQ(label_name(8), "C-uniform");
  EXPECT_EQ(label_name(12), "label12");
}

TEST(Pipeline, LabelsCsvRoundTrip) {
  const auto dir = testutil::scratch_dir("labels");
  write_labels_csv(dir / "l.csv", {"x", "y"}, {3, 0});
  const auto back = read_labels_csv(dir / "l.csv");
  EXPECT_EQ(back.at("x"), 3);
  EXPECT_EQ(back.at("y"), 0);
  write_labels_csv(dir / "dup.csv", {"x", "x"}, {1, 2});
  EXPECT_THROW(read_labels_csv(dir / "dup.csv"), std::runtime_error);
}

TEST(Pipeline, FeaturesRulesAndSlices) {
  const auto dir = testutil::scratch_dir("pipeline");
  FieldPair stripes = filled(0.1, 0.8);
  for (int j = 0; j < kGrid.ny; ++j)
    for (int i = 0; i < kGrid.nx; ++i)
      if (i % 8 < 5) paint(stripes, i, j, 0.8, 0.1);
  std::vector<RunRecord> recs(3);
  for (int k = 0; k < 3; ++k) {
    RunRecord& r = recs[k];
    r.run_id = "r" + std::to_string(k);
    r.a0 = 0.2 + 0.1 * k;
    r.b0 = 0.3;
    r.chi_ab = r.chi_ac = r.chi_bc = k == 2 ? 0.006 : 0.003;
    r.state_id = k == 1 ? StateID::State2 : StateID::State1;
    r.snapshot_path = "runs/" + r.run_id + ".snap";
    r.image_path = "runs/" + r.run_id + ".png";
    write_snapshot(dir / r.snapshot_path, stripes);
    write_png(dir / r.image_path, render_rgb(stripes));
  }
  const auto eligible = eligible_records(recs);
  ASSERT_EQ(eligible.size(), 2u);
  const Eigen::MatrixXd x = feature_matrix(eligible, dir, 20, 20);
  EXPECT_EQ(x.rows(), 2);
  EXPECT_EQ(x.cols(), 1200);
  EXPECT_EQ(rule_labels(eligible, dir), (std::vector<int>{1, 1}));
  const auto slices = points_by_slice(recs, {{"r0", 1}, {"r2", 4}});
  ASSERT_EQ(slices.size(), 2u);
  EXPECT_EQ(slices.at("0.0030-0.0030-0.0030").size(), 1u);
  EXPECT_EQ(slices.at("0.0060-0.0060-0.0060")[0].label, 4);
}
