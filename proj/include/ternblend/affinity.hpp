#pragma once

// Affinity propagation on negative squared Euclidean similarities.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ternblend/kmeans.hpp"

namespace ternblend {

struct AffinityOptions {
  std::optional<double> preference;  // default: median off-diagonal similarity
  double damping = 0.9;
  int stable_iterations = 15;
  int max_iter = 1000;
  std::uint64_t seed = 0;  // tie-breaking noise
};

inline Eigen::MatrixXd negative_sq_distances(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) s(i, k) = -(x.row(i) - x.row(k)).squaredNorm();
  }
  return s;
}

inline double median_off_diagonal(const Eigen::MatrixXd& s) {
  std::vector<double> v;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index k = 0; k < s.cols(); ++k) {
      if (i != k) v.push_back(s(i, k));
    }
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Net similarity of an exemplar set: exemplars take their preference s(k,k),
/// every other point its most similar exemplar.
inline double net_similarity(const Eigen::MatrixXd& s, const std::vector<int>& exemplars) {
  std::vector<char> is_exemplar(static_cast<std::size_t>(s.rows()), 0);
  for (int e : exemplars) is_exemplar[e] = 1;
  double net = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    if (is_exemplar[i]) {
      net += s(i, i);
      continue;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int e : exemplars) best = std::max(best, s(i, e));
    net += best;
  }
  return net;
}

/// Message passing cannot split exactly tied candidates (a symmetric pair
/// settles with both members on the decision boundary). Drop exemplars while
/// doing so strictly raises the net similarity.
inline void prune_exemplars(const Eigen::MatrixXd& s, std::vector<int>& exemplars) {
  double net = net_similarity(s, exemplars);
  while (exemplars.size() > 1) {
    std::size_t drop = exemplars.size();
    double best = net;
    for (std::size_t c = 0; c < exemplars.size(); ++c) {
      std::vector<int> fewer = exemplars;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(c));
      const double v = net_similarity(s, fewer);
      if (v > best + 1e-9 * std::abs(best)) {
        best = v;
        drop = c;
      }
    }
    if (drop == exemplars.size()) return;
    exemplars.erase(exemplars.begin() + static_cast<std::ptrdiff_t>(drop));
    net = best;
  }
}

inline ClusterResult affinity_propagation(const Eigen::MatrixXd& x, const AffinityOptions& opt = {}) {
  const Eigen::Index n = x.rows();
  if (n < 2) throw std::invalid_argument("affinity: need at least 2 samples");
  if (!(opt.damping >= 0.5 && opt.damping < 1.0)) {
    throw std::invalid_argument("affinity: damping must lie in [0.5, 1)");
  }
  if (!x.allFinite()) throw std::invalid_argument("affinity: non-finite entries");

  ClusterResult res;
  bool identical = true;
  for (Eigen::Index i = 1; i < n && identical; ++i) identical = x.row(i) == x.row(0);
  if (identical) {
    res.k = 1;
    res.labels.assign(n, 0);
    res.exemplars = {0};
    return res;
  }

  Eigen::MatrixXd s = negative_sq_distances(x);
  const double pref = opt.preference.value_or(median_off_diagonal(s));
  for (Eigen::Index i = 0; i < n; ++i) s(i, i) = pref;
  // Tiny deterministic noise removes degenerate ties between equal similarities.
  detail::SplitMix64 rng(opt.seed);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double u = detail::unit_uniform(rng);
      s(i, k) += (1e-12 * std::abs(s(i, k)) + 1e-300) * u;
    }
  }

  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double lam = opt.damping;
  std::vector<char> prev_ex(n, 0);
  int stable = 0;
  res.converged = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    // Responsibilities.
    for (Eigen::Index i = 0; i < n; ++i) {
      double first = -std::numeric_limits<double>::infinity();
      double second = first;
      Eigen::Index arg = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double v = a(i, k) + s(i, k);
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (Eigen::Index k = 0; k < n; ++k) {
        const double fresh = s(i, k) - (k == arg ? second : first);
        r(i, k) = lam * r(i, k) + (1.0 - lam) * fresh;
      }
    }
    // Availabilities.
    for (Eigen::Index k = 0; k < n; ++k) {
      double pos = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i != k) pos += std::max(r(i, k), 0.0);
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        double fresh;
        if (i == k) {
          fresh = pos;
        } else {
          fresh = std::min(0.0, r(k, k) + pos - std::max(r(i, k), 0.0));
        }
        a(i, k) = lam * a(i, k) + (1.0 - lam) * fresh;
      }
    }
    std::vector<char> ex(n, 0);
    bool any = false;
    for (Eigen::Index k = 0; k < n; ++k) {
      ex[k] = (a(k, k) + r(k, k)) > 0.0;
      any = any || ex[k];
    }
    stable = (any && ex == prev_ex) ? stable + 1 : 0;
    prev_ex = std::move(ex);
    res.iterations = it;
    if (stable >= opt.stable_iterations) {
      res.converged = true;
      break;
    }
  }

  for (Eigen::Index k = 0; k < n; ++k) {
    if (prev_ex[k]) res.exemplars.push_back(static_cast<int>(k));
  }
  if (res.exemplars.empty()) {
    // Best effort: the single strongest exemplar candidate.
    Eigen::Index arg = 0;
    (a.diagonal() + r.diagonal()).maxCoeff(&arg);
    res.exemplars.push_back(static_cast<int>(arg));
  }
  prune_exemplars(s, res.exemplars);
  res.k = static_cast<int>(res.exemplars.size());
  res.labels.assign(n, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_s = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < res.k; ++c) {
      const Eigen::Index e = res.exemplars[c];
      if (e == i) {
        best = c;
        break;
      }
      if (s(i, e) > best_s) {
        best_s = s(i, e);
        best = c;
      }
    }
    res.labels[i] = best;
  }
  return res;
}

}  // namespace ternblend
