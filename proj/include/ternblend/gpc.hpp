#pragma once

// Gaussian-process classification of morphology labels over initial
// composition (a0, b0): one-vs-rest binary classifiers with a logistic link,
// Laplace-approximated posteriors and a fixed RBF kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ternblend/csv.hpp"
#include "ternblend/image.hpp"
#include "ternblend/kmeans.hpp"
#include "ternblend/labeler.hpp"
#include "ternblend/snapshot_io.hpp"
#include "ternblend/sweep.hpp"

namespace ternblend {

struct LabeledPoint {
  double a0 = 0.0;
  double b0 = 0.0;
  int label = 0;
  ChiCase chi{};
  int origin = -1;  // index of the original point this row derives from
};

inline bool in_simplex(double a0, double b0) {
  return a0 > 0.0 && b0 > 0.0 && a0 < 1.0 && b0 < 1.0 && a0 + b0 < 1.0;
}

// ---------------------------------------------------------------------------
// Augmentation and splitting

/// Each offset shifts both a0 and b0 of a point; the default pair yields
/// exactly three rows per original point.
struct AugmentationConfig {
  std::vector<double> offsets{0.002, -0.005};

  void validate() const {
    for (double e : offsets) {
      if (e == 0.0 || !std::isfinite(e) || std::abs(e) >= 0.05) {
        throw std::invalid_argument("augment: offsets must be non-zero with magnitude < 0.05");
      }
    }
  }
};

struct AugmentResult {
  std::vector<LabeledPoint> points;
  int dropped = 0;
};

inline AugmentResult augment(const std::vector<LabeledPoint>& data,
                             const AugmentationConfig& cfg = {}) {
  cfg.validate();
  AugmentResult out;
  for (std::size_t k = 0; k < data.size(); ++k) {
    LabeledPoint base = data[k];
    if (base.origin < 0) base.origin = static_cast<int>(k);
    out.points.push_back(base);
    for (double e : cfg.offsets) {
      LabeledPoint p = base;
      p.a0 += e;
      p.b0 += e;
      if (in_simplex(p.a0, p.b0)) {
        out.points.push_back(p);
      } else {
        ++out.dropped;
      }
    }
  }
  return out;
}

struct TrainTestSplit {
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;
};

/// Stratified split of original points: round(test_fraction * n_c) of each
/// class go to the test side. Origins are set to the input index.
inline TrainTestSplit split_train_test(const std::vector<LabeledPoint>& data, double test_fraction,
                                       std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split: test_fraction must lie in (0, 1)");
  }
  std::map<int, std::vector<int>> by_label;
  for (std::size_t k = 0; k < data.size(); ++k) by_label[data[k].label].push_back(static_cast<int>(k));
  detail::SplitMix64 rng(seed);
  std::vector<char> is_test(data.size(), 0);
  std::size_t n_test = 0;
  int largest = -1;
  std::size_t largest_n = 0;
  for (auto& [label, idx] : by_label) {
    for (std::size_t m = idx.size(); m > 1; --m) {
      const auto pick = static_cast<std::size_t>(detail::unit_uniform(rng) * static_cast<double>(m));
      std::swap(idx[m - 1], idx[std::min(pick, m - 1)]);
    }
    const auto take = static_cast<std::size_t>(std::lround(test_fraction * idx.size()));
    for (std::size_t m = 0; m < take; ++m) is_test[idx[m]] = 1;
    n_test += take;
    if (idx.size() > largest_n) {
      largest_n = idx.size();
      largest = label;
    }
  }
  if (n_test == 0 && largest_n > 1) is_test[by_label[largest].front()] = 1;
  TrainTestSplit out;
  for (std::size_t k = 0; k < data.size(); ++k) {
    LabeledPoint p = data[k];
    p.origin = static_cast<int>(k);
    (is_test[k] ? out.test : out.train).push_back(p);
  }
  return out;
}

/// True when no training row derives from a test point.
inline bool split_is_clean(const std::vector<LabeledPoint>& train,
                           const std::vector<LabeledPoint>& test) {
  std::set<int> test_origins;
  for (const LabeledPoint& p : test) test_origins.insert(p.origin);
  for (const LabeledPoint& p : train) {
    if (test_origins.count(p.origin)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Model

struct GpcOptions {
  double length_scale = 1.0;
  double jitter = 1e-8;
  double tol = 1e-6;
  int max_newton = 100;
  bool optimize_length_scale = false;
};

struct GpcModel {
  Eigen::MatrixXd x;           // n x 2 training inputs (a0, b0)
  std::vector<int> y;          // training labels
  std::vector<int> classes;    // sorted class ids
  std::vector<Eigen::VectorXd> modes;  // latent Laplace mode per class (empty if one class)
  double length_scale = 1.0;
  double jitter = 1e-8;

  // Derived from the above by prepare().
  std::vector<Eigen::VectorXd> grad;    // d log p(y|f) / df at the mode
  std::vector<Eigen::VectorXd> sqrt_w;  // sqrt of the negative Hessian
  std::vector<Eigen::MatrixXd> chol;    // lower factor of I + W^1/2 K W^1/2
};

namespace detail {

inline double sigmoid(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

inline double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& x1, const Eigen::MatrixXd& x2, double ell) {
  Eigen::MatrixXd k(x1.rows(), x2.rows());
  const double inv = 1.0 / (2.0 * ell * ell);
  for (Eigen::Index i = 0; i < x1.rows(); ++i) {
    for (Eigen::Index j = 0; j < x2.rows(); ++j) {
      k(i, j) = std::exp(-(x1.row(i) - x2.row(j)).squaredNorm() * inv);
    }
  }
  return k;
}

struct LaplaceFit {
  Eigen::VectorXd f;
  Eigen::VectorXd grad;
  Eigen::VectorXd sqrt_w;
  Eigen::MatrixXd chol;
  double log_marginal = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Mode of the latent posterior for targets t in {0, 1}.
inline LaplaceFit laplace_mode(const Eigen::MatrixXd& k, const Eigen::VectorXd& t, double tol,
                               int max_iter) {
  const Eigen::Index n = k.rows();
  LaplaceFit out;
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  auto objective = [&](const Eigen::VectorXd& aa, const Eigen::VectorXd& ff) {
    double s = -0.5 * aa.dot(ff);
    for (Eigen::Index i = 0; i < n; ++i) s += log_sigmoid((2.0 * t[i] - 1.0) * ff[i]);
    return s;
  };
  double psi = objective(a, f);
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::VectorXd pi(n), w(n), sw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      pi[i] = sigmoid(f[i]);
      w[i] = pi[i] * (1.0 - pi[i]);
      sw[i] = std::sqrt(w[i]);
    }
    Eigen::MatrixXd b_mat = sw.asDiagonal() * k * sw.asDiagonal();
    b_mat.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(b_mat);
    if (llt.info() != Eigen::Success) throw std::runtime_error("gpc: Cholesky factorisation failed");
    const Eigen::VectorXd b = w.cwiseProduct(f) + (t - pi);
    const Eigen::VectorXd kb = k * b;
    Eigen::VectorXd a_new = b - sw.cwiseProduct(llt.solve(sw.cwiseProduct(kb)));
    Eigen::VectorXd f_new = k * a_new;
    double psi_new = objective(a_new, f_new);
    // Step halving keeps the objective from decreasing.
    for (int h = 0; h < 30 && psi_new < psi; ++h) {
      a_new = 0.5 * (a + a_new);
      f_new = k * a_new;
      psi_new = objective(a_new, f_new);
    }
    a = a_new;
    f = f_new;
    psi = psi_new;
    double res = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) res = std::max(res, std::abs(t[i] - sigmoid(f[i]) - a[i]));
    out.iterations = it;
    out.residual = res;
    if (res < tol) break;
  }
  out.f = f;
  out.grad.resize(n);
  out.sqrt_w.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double p = sigmoid(f[i]);
    out.grad[i] = t[i] - p;
    out.sqrt_w[i] = std::sqrt(p * (1.0 - p));
  }
  Eigen::MatrixXd b_mat = out.sqrt_w.asDiagonal() * k * out.sqrt_w.asDiagonal();
  b_mat.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(b_mat);
  if (llt.info() != Eigen::Success) throw std::runtime_error("gpc: Cholesky factorisation failed");
  out.chol = llt.matrixL();
  out.log_marginal = objective(out.grad, out.f) - out.chol.diagonal().array().log().sum();
  return out;
}

inline Eigen::MatrixXd inputs_of(const std::vector<LabeledPoint>& pts) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    x(static_cast<Eigen::Index>(k), 0) = pts[k].a0;
    x(static_cast<Eigen::Index>(k), 1) = pts[k].b0;
  }
  return x;
}

inline Eigen::VectorXd targets_for(const std::vector<int>& y, int cls) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) t[static_cast<Eigen::Index>(i)] = y[i] == cls ? 1.0 : 0.0;
  return t;
}

inline Eigen::MatrixXd training_kernel(const GpcModel& m) {
  Eigen::MatrixXd k = rbf_kernel(m.x, m.x, m.length_scale);
  k.diagonal().array() += m.jitter;
  return k;
}

}  // namespace detail

/// Recomputes the per-class quantities needed for prediction from the modes.
inline void prepare(GpcModel& m) {
  m.grad.clear();
  m.sqrt_w.clear();
  m.chol.clear();
  if (m.classes.size() < 2) return;
  const Eigen::MatrixXd k = detail::training_kernel(m);
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const Eigen::VectorXd t = detail::targets_for(m.y, m.classes[c]);
    const Eigen::VectorXd& f = m.modes[c];
    Eigen::VectorXd g(f.size()), sw(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const double p = detail::sigmoid(f[i]);
      g[i] = t[i] - p;
      sw[i] = std::sqrt(p * (1.0 - p));
    }
    Eigen::MatrixXd b = sw.asDiagonal() * k * sw.asDiagonal();
    b.diagonal().array() += 1.0;
    Eigen::LLT<Eigen::MatrixXd> llt(b);
    if (llt.info() != Eigen::Success) throw std::runtime_error("gpc: Cholesky factorisation failed");
    m.grad.push_back(g);
    m.sqrt_w.push_back(sw);
    m.chol.push_back(llt.matrixL());
  }
}

/// Summed approximate log marginal likelihood over the binary problems.
inline double gpc_log_marginal(const std::vector<LabeledPoint>& data, double length_scale,
                               const GpcOptions& opt) {
  const Eigen::MatrixXd x = detail::inputs_of(data);
  std::vector<int> y;
  std::set<int> cls;
  for (const LabeledPoint& p : data) {
    y.push_back(p.label);
    cls.insert(p.label);
  }
  Eigen::MatrixXd k = detail::rbf_kernel(x, x, length_scale);
  k.diagonal().array() += opt.jitter;
  double s = 0.0;
  for (int c : cls) {
    s += detail::laplace_mode(k, detail::targets_for(y, c), opt.tol, opt.max_newton).log_marginal;
  }
  return s;
}

/// Golden-section search over log length scale in [0.01, 10].
inline double optimize_length_scale(const std::vector<LabeledPoint>& data, const GpcOptions& opt) {
  double lo = std::log(0.01), hi = std::log(10.0);
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double f1 = gpc_log_marginal(data, std::exp(x1), opt);
  double f2 = gpc_log_marginal(data, std::exp(x2), opt);
  for (int it = 0; it < 40; ++it) {
    if (f1 > f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - phi * (hi - lo);
      f1 = gpc_log_marginal(data, std::exp(x1), opt);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + phi * (hi - lo);
      f2 = gpc_log_marginal(data, std::exp(x2), opt);
    }
  }
  return std::exp(0.5 * (lo + hi));
}

inline GpcModel gpc_fit(const std::vector<LabeledPoint>& data, const GpcOptions& opt = {}) {
  if (data.empty()) throw std::invalid_argument("gpc_fit: no training points");
  if (!(opt.length_scale > 0.0)) throw std::invalid_argument("gpc_fit: length_scale must be > 0");
  std::map<int, int> counts;
  for (const LabeledPoint& p : data) ++counts[p.label];
  for (const auto& [cls, n] : counts) {
    if (n < 3) {
      throw std::invalid_argument("gpc_fit: class " + std::to_string(cls) +
                                  " has fewer than 3 training points");
    }
  }
  GpcModel m;
  m.x = detail::inputs_of(data);
  for (const LabeledPoint& p : data) m.y.push_back(p.label);
  for (const auto& [cls, n] : counts) m.classes.push_back(cls);
  m.length_scale = opt.optimize_length_scale && m.classes.size() > 1
                       ? optimize_length_scale(data, opt)
                       : opt.length_scale;
  m.jitter = opt.jitter;
  if (m.classes.size() > 1) {
    const Eigen::MatrixXd k = detail::training_kernel(m);
    for (int cls : m.classes) {
      const detail::LaplaceFit fit =
          detail::laplace_mode(k, detail::targets_for(m.y, cls), opt.tol, opt.max_newton);
      if (!(fit.residual < opt.tol)) {
        throw std::runtime_error("gpc_fit: Newton iteration for class " + std::to_string(cls) +
                                 " did not converge (residual " + std::to_string(fit.residual) +
                                 ")");
      }
      m.modes.push_back(fit.f);
    }
  }
  prepare(m);
  return m;
}

/// Max-norm of grad log p(y|f) - K^{-1} f at the stored mode of class index c.
inline double stationarity_residual(const GpcModel& m, std::size_t c) {
  const Eigen::MatrixXd k = detail::training_kernel(m);
  const Eigen::VectorXd kinv_f = k.ldlt().solve(m.modes.at(c));
  return (m.grad.at(c) - kinv_f).cwiseAbs().maxCoeff();
}

struct GpcPrediction {
  std::vector<int> labels;
  Eigen::MatrixXd probabilities;  // n_queries x n_classes, rows sum to 1
};

inline GpcPrediction gpc_predict(const GpcModel& m, const Eigen::MatrixXd& queries) {
  if (queries.cols() != 2) throw std::invalid_argument("gpc_predict: queries must have 2 columns");
  const Eigen::Index nq = queries.rows();
  const auto nc = static_cast<Eigen::Index>(m.classes.size());
  GpcPrediction out;
  out.probabilities = Eigen::MatrixXd::Ones(nq, nc);
  if (nc > 1) {
    const Eigen::MatrixXd ks = detail::rbf_kernel(queries, m.x, m.length_scale);
    for (Eigen::Index c = 0; c < nc; ++c) {
      const Eigen::MatrixXd& l = m.chol[c];
      for (Eigen::Index q = 0; q < nq; ++q) {
        const Eigen::VectorXd kq = ks.row(q).transpose();
        const double mean = kq.dot(m.grad[c]);
        const Eigen::VectorXd v =
            l.triangularView<Eigen::Lower>().solve(m.sqrt_w[c].cwiseProduct(kq));
        const double var = std::max(1.0 - v.squaredNorm(), 0.0);
        out.probabilities(q, c) =
            detail::sigmoid(mean / std::sqrt(1.0 + std::numbers::pi * var / 8.0));
      }
    }
  }
  for (Eigen::Index q = 0; q < nq; ++q) {
    out.probabilities.row(q) /= out.probabilities.row(q).sum();
    Eigen::Index arg = 0;
    out.probabilities.row(q).maxCoeff(&arg);
    out.labels.push_back(m.classes[arg]);
  }
  return out;
}

inline double evaluate(const GpcModel& m, const std::vector<LabeledPoint>& test) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  const GpcPrediction p = gpc_predict(m, detail::inputs_of(test));
  std::size_t hit = 0;
  for (std::size_t k = 0; k < test.size(); ++k) hit += p.labels[k] == test[k].label;
  return static_cast<double>(hit) / static_cast<double>(test.size());
}

// ---------------------------------------------------------------------------
// Prediction maps

struct PredictionMap {
  int n_a = 0, n_b = 0;
  std::vector<double> a0, b0;     // axis values
  std::vector<int> labels;        // row-major over (b index, a index); -1 = masked
  std::vector<double> max_prob;
};

inline PredictionMap prediction_map(const GpcModel& m, double a_lo = 0.1, double a_hi = 0.8,
                                    double b_lo = 0.1, double b_hi = 0.45, int n_a = 141,
                                    int n_b = 71) {
  if (n_a < 2 || n_b < 2) throw std::invalid_argument("prediction_map: resolution must be >= 2");
  if (!(a_lo > 0.0 && a_hi < 1.0 && a_lo < a_hi && b_lo > 0.0 && b_hi < 1.0 && b_lo < b_hi)) {
    throw std::invalid_argument("prediction_map: ranges must be increasing and inside (0, 1)");
  }
  PredictionMap map;
  map.n_a = n_a;
  map.n_b = n_b;
  for (int i = 0; i < n_a; ++i) map.a0.push_back(a_lo + (a_hi - a_lo) * i / (n_a - 1));
  for (int j = 0; j < n_b; ++j) map.b0.push_back(b_lo + (b_hi - b_lo) * j / (n_b - 1));
  std::vector<std::size_t> valid;
  Eigen::MatrixXd q(static_cast<Eigen::Index>(n_a) * n_b, 2);
  Eigen::Index nq = 0;
  map.labels.assign(static_cast<std::size_t>(n_a) * n_b, -1);
  map.max_prob.assign(map.labels.size(), 0.0);
  for (int j = 0; j < n_b; ++j) {
    for (int i = 0; i < n_a; ++i) {
      if (map.a0[i] + map.b0[j] >= kCompositionMargin) continue;
      valid.push_back(static_cast<std::size_t>(j) * n_a + i);
      q(nq, 0) = map.a0[i];
      q(nq, 1) = map.b0[j];
      ++nq;
    }
  }
  const GpcPrediction p = gpc_predict(m, q.topRows(nq));
  for (Eigen::Index k = 0; k < nq; ++k) {
    map.labels[valid[k]] = p.labels[k];
    map.max_prob[valid[k]] = p.probabilities.row(k).maxCoeff();
  }
  return map;
}

inline void write_map_csv(const std::filesystem::path& path, const PredictionMap& map) {
  std::ofstream os = detail::open_out(path);
  os << "a0,b0,label,max_prob\n";
  for (int j = 0; j < map.n_b; ++j) {
    for (int i = 0; i < map.n_a; ++i) {
      const std::size_t k = static_cast<std::size_t>(j) * map.n_a + i;
      os << fmt_double(map.a0[i]) << ',' << fmt_double(map.b0[j]) << ',' << map.labels[k] << ','
         << fmt_double(map.max_prob[k]) << '\n';
    }
  }
}

/// One block of `scale` x `scale` pixels per map cell; b0 increases upwards.
inline RgbImage render_map(const PredictionMap& map, const std::vector<int>& classes, int scale = 4) {
  RgbImage img(map.n_a * scale, map.n_b * scale);
  for (int j = 0; j < map.n_b; ++j) {
    for (int i = 0; i < map.n_a; ++i) {
      const int label = map.labels[static_cast<std::size_t>(j) * map.n_a + i];
      const auto pos = std::find(classes.begin(), classes.end(), label);
      const auto rgb = palette_color(pos == classes.end() ? -1 : static_cast<int>(pos - classes.begin()));
      for (int dy = 0; dy < scale; ++dy) {
        for (int dx = 0; dx < scale; ++dx) {
          const int x = i * scale + dx;
          const int y = (map.n_b - 1 - j) * scale + dy;
          for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = rgb[ch];
        }
      }
    }
  }
  return img;
}

inline void write_legend(const std::filesystem::path& path, const std::vector<int>& classes) {
  std::ofstream os = detail::open_out(path);
  os << "label,name,r,g,b\n";
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto rgb = palette_color(static_cast<int>(c));
    os << classes[c] << ',' << label_name(classes[c]) << ',' << int(rgb[0]) << ',' << int(rgb[1])
       << ',' << int(rgb[2]) << '\n';
  }
  os << "-1,masked,255,255,255\n";
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr char kGpcMagic[8] = {'G', 'P', 'C', 'M', '0', '0', '0', '1'};

/// magic, u64 n, u64 n_classes, f64 length_scale, f64 jitter, inputs (n x 2
/// row-major), i64 labels[n], i64 classes[n_classes], modes (n_classes x n;
/// absent for a single class).
inline void write_gpc(const std::filesystem::path& path, const GpcModel& m) {
  std::ofstream os = detail::open_out(path);
  os.write(kGpcMagic, 8);
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.x.rows()));
  detail::put_le<std::uint64_t>(os, m.classes.size());
  detail::put_le(os, m.length_scale);
  detail::put_le(os, m.jitter);
  for (Eigen::Index i = 0; i < m.x.rows(); ++i) {
    detail::put_le(os, m.x(i, 0));
    detail::put_le(os, m.x(i, 1));
  }
  for (int v : m.y) detail::put_le<std::int64_t>(os, v);
  for (int v : m.classes) detail::put_le<std::int64_t>(os, v);
  for (const Eigen::VectorXd& f : m.modes) {
    for (Eigen::Index i = 0; i < f.size(); ++i) detail::put_le(os, f[i]);
  }
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline GpcModel read_gpc(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  const std::string what = "gpc model '" + path.string() + "'";
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kGpcMagic, 8) != 0) {
    throw std::runtime_error(what + ": bad magic");
  }
  GpcModel m;
  const auto n = static_cast<Eigen::Index>(detail::get_le<std::uint64_t>(is, what));
  const auto nc = detail::get_le<std::uint64_t>(is, what);
  m.length_scale = detail::get_le<double>(is, what);
  m.jitter = detail::get_le<double>(is, what);
  m.x.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    m.x(i, 0) = detail::get_le<double>(is, what);
    m.x(i, 1) = detail::get_le<double>(is, what);
  }
  for (Eigen::Index i = 0; i < n; ++i) m.y.push_back(static_cast<int>(detail::get_le<std::int64_t>(is, what)));
  for (std::uint64_t c = 0; c < nc; ++c) {
    m.classes.push_back(static_cast<int>(detail::get_le<std::int64_t>(is, what)));
  }
  if (nc > 1) {
    for (std::uint64_t c = 0; c < nc; ++c) {
      Eigen::VectorXd f(n);
      for (Eigen::Index i = 0; i < n; ++i) f[i] = detail::get_le<double>(is, what);
      m.modes.push_back(f);
    }
  }
  prepare(m);
  return m;
}

}  // namespace ternblend
