#include <gtest/gtest.h>

#include <limits>
#include <random>
#include <set>

#include "ternblend/affinity.hpp"

using namespace ternblend;

namespace {

// Exhaustive search over exemplar sets for the best net similarity: every
// exemplar takes the preference, every other point its most similar exemplar.
std::vector<int> best_exemplar_set(const Eigen::MatrixXd& x, double pref) {
  const int n = static_cast<int>(x.rows());
  const Eigen::MatrixXd s = negative_sq_distances(x);
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> arg;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    double net = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        net += pref;
        continue;
      }
      double m = -std::numeric_limits<double>::infinity();
      for (int e = 0; e < n; ++e) {
        if (mask & (1u << e)) m = std::max(m, s(i, e));
      }
      net += m;
    }
    if (net > best) {
      best = net;
      arg.clear();
      for (int e = 0; e < n; ++e) {
        if (mask & (1u << e)) arg.push_back(e);
      }
    }
  }
  return arg;
}

void expect_consistent(const ClusterResult& r) {
  ASSERT_EQ(static_cast<int>(r.exemplars.size()), r.k);
  for (int c = 0; c < r.k; ++c) EXPECT_EQ(r.labels[r.exemplars[c]], c);
  for (int l : r.labels) {
    EXPECT_GE(l, 0);
    EXPECT_LT(l, r.k);
  }
}

}  // namespace

TEST(Affinity, IdenticalPointsFormOneCluster) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(7, 3, 0.25);
  const ClusterResult r = affinity_propagation(x);
  EXPECT_EQ(r.k, 1);
  expect_consistent(r);
}

TEST(Affinity, TwoFarPairsMatchExhaustiveOptimum) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 0, 1, 10, 0, 10, 1;
  const ClusterResult r = affinity_propagation(x);
  const double pref = median_off_diagonal(negative_sq_distances(x));
  const std::vector<int> oracle = best_exemplar_set(x, pref);
  EXPECT_EQ(r.k, 2);
  EXPECT_EQ(r.k, static_cast<int>(oracle.size()));
  EXPECT_EQ(r.labels[0], r.labels[1]);
  EXPECT_EQ(r.labels[2], r.labels[3]);
  EXPECT_NE(r.labels[0], r.labels[2]);
  expect_consistent(r);
}

TEST(Affinity, PruningNeverLowersNetSimilarity) {
  Eigen::MatrixXd x(6, 1);
  x << 0.0, 0.5, 5.0, 5.5, 10.0, 10.5;
  Eigen::MatrixXd s = negative_sq_distances(x);
  for (Eigen::Index i = 0; i < 6; ++i) s(i, i) = -1.0;
  std::vector<int> all{0, 1, 2, 3, 4, 5};
  const double before = net_similarity(s, all);
  prune_exemplars(s, all);
  EXPECT_EQ(all.size(), 3u);
  EXPECT_GT(net_similarity(s, all), before);
  EXPECT_EQ(all.size(), best_exemplar_set(x, -1.0).size());
}

TEST(Affinity, LowerPreferenceNeverAddsClusters) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  Eigen::MatrixXd x(20, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const double median = median_off_diagonal(negative_sq_distances(x));
  int previous = std::numeric_limits<int>::max();
  for (double factor : {1.0, 2.0, 5.0, 20.0, 100.0}) {
    AffinityOptions opt;
    opt.preference = factor * median;
    const ClusterResult r = affinity_propagation(x, opt);
    expect_consistent(r);
    EXPECT_LE(r.k, previous) << "preference " << *opt.preference;
    previous = r.k;
  }
  EXPECT_EQ(previous, 1);
}

TEST(Affinity, StrongNegativePreferenceIsAccepted) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(12, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 20.0 * n(rng);
  AffinityOptions opt;
  opt.preference = -250.0;
  const ClusterResult r = affinity_propagation(x, opt);
  EXPECT_GE(r.k, 1);
  expect_consistent(r);
}

TEST(Affinity, Validation) {
  EXPECT_THROW(affinity_propagation(Eigen::MatrixXd::Zero(1, 2)), std::invalid_argument);
  AffinityOptions opt;
  opt.damping = 0.3;
  EXPECT_THROW(affinity_propagation(Eigen::MatrixXd::Random(4, 2), opt), std::invalid_argument);
}

TEST(Affinity, DeterministicForFixedSeed) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(15, 3);
  EXPECT_EQ(affinity_propagation(x).labels, affinity_propagation(x).labels);
}
