#pragma once

// Lloyd k-means with k-means++ seeding and restarts, plus automatic elbow
// selection over a range of k.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "ternblend/solver.hpp"

namespace ternblend {

struct ClusterResult {
  std::vector<int> labels;
  Eigen::MatrixXd centers;     // k-means: k x n_features
  std::vector<int> exemplars;  // affinity propagation: sample index per cluster
  int k = 0;
  double wcss = 0.0;
  bool converged = true;
  int iterations = 0;
};

struct KMeansOptions {
  int restarts = 10;
  int max_iter = 300;
};

namespace detail {

/// Uniform in [0, 1) from a splitmix stream; portable across standard libraries.
inline double unit_uniform(SplitMix64& rng) {
  return static_cast<double>(rng.next() >> 11) * 0x1.0p-53;
}

inline double wcss_of(const Eigen::MatrixXd& x, const Eigen::MatrixXd& centers,
                      const std::vector<int>& labels) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i) - centers.row(labels[i])).squaredNorm();
  return s;
}

inline Eigen::MatrixXd kmeanspp_seed(const Eigen::MatrixXd& x, int k, SplitMix64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  Eigen::Index first = static_cast<Eigen::Index>(unit_uniform(rng) * static_cast<double>(n));
  centers.row(0) = x.row(std::min(first, n - 1));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(i) - centers.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = unit_uniform(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(c) % n;  // fewer distinct points than k
    }
    centers.row(c) = x.row(pick);
  }
  return centers;
}

}  // namespace detail

/// One Lloyd run from the given centres. Throws std::logic_error if the
/// objective ever increases between iterations.
inline ClusterResult lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd centers, int max_iter) {
  const Eigen::Index n = x.rows();
  const int k = static_cast<int>(centers.rows());
  ClusterResult res;
  res.k = k;
  res.labels.assign(n, -1);
  res.converged = false;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (best != res.labels[i]) {
        res.labels[i] = best;
        changed = true;
      }
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.labels[i]) += x.row(i);
      ++counts[res.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: move it onto the point farthest from its centre.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = (x.row(i) - centers.row(res.labels[i])).squaredNorm();
        if (d > far_d && counts[res.labels[i]] > 1) {
          far_d = d;
          far = i;
        }
      }
      --counts[res.labels[far]];
      res.labels[far] = c;
      counts[c] = 1;
      centers.row(c) = x.row(far);
      changed = true;
    }
    const double w = detail::wcss_of(x, centers, res.labels);
    if (w > prev * (1.0 + 1e-12) + 1e-300) {
      throw std::logic_error("kmeans: within-cluster sum of squares increased at iteration " +
                             std::to_string(it));
    }
    prev = w;
    res.wcss = w;
    res.iterations = it;
    if (!changed) {
      res.converged = true;
      break;
    }
  }
  res.centers = std::move(centers);
  return res;
}

inline ClusterResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                            const KMeansOptions& opt = {}) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (k > x.rows()) throw std::invalid_argument("kmeans: k exceeds the number of samples");
  if (opt.restarts < 1 || opt.max_iter < 1) throw std::invalid_argument("kmeans: bad options");
  if (!x.allFinite()) throw std::invalid_argument("kmeans: non-finite entries");
  detail::SplitMix64 rng(seed);
  ClusterResult best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < opt.restarts; ++r) {
    ClusterResult res = lloyd(x, detail::kmeanspp_seed(x, k, rng), opt.max_iter);
    if (res.wcss < best.wcss) best = std::move(res);
  }
  return best;
}

struct ElbowResult {
  int k_star = 1;
  bool flat = false;
  std::vector<int> ks;
  std::vector<double> wcss;
};

/// Minimum ratio of the drop into the elbow to the drop after it for the
/// curvature maximum to count as an elbow.
inline constexpr double kElbowMinRatio = 3.0;

/// k* maximises the second difference wcss(k-1) - 2 wcss(k) + wcss(k+1) over
/// interior k. A curve without a pronounced bend is flagged flat (k* = k_min).
inline ElbowResult elbow_select(const Eigen::MatrixXd& x, int k_min, int k_max, std::uint64_t seed,
                                const KMeansOptions& opt = {}) {
  if (k_min < 1 || k_max > x.rows() || k_max < k_min + 2) {
    throw std::invalid_argument("elbow: need 1 <= k_min, k_min + 2 <= k_max <= n_samples");
  }
  ElbowResult out;
  for (int k = k_min; k <= k_max; ++k) {
    out.ks.push_back(k);
    out.wcss.push_back(kmeans(x, k, seed, opt).wcss);
  }
  out.k_star = k_min;
  const double scale = out.wcss.front();
  double best = -std::numeric_limits<double>::infinity();
  std::size_t arg = 1;
  for (std::size_t m = 1; m + 1 < out.wcss.size(); ++m) {
    const double d2 = out.wcss[m - 1] - 2.0 * out.wcss[m] + out.wcss[m + 1];
    if (d2 > best) {
      best = d2;
      arg = m;
    }
  }
  const double before = out.wcss[arg - 1] - out.wcss[arg];
  const double after = std::max(out.wcss[arg] - out.wcss[arg + 1], 0.0);
  const bool degenerate = !(scale > 0.0) || before <= 1e-12 * scale;
  if (degenerate || !(best > 0.0) || before < kElbowMinRatio * after) {
    out.flat = true;
    return out;
  }
  out.k_star = out.ks[arg];
  return out;
}

}  // namespace ternblend
