#pragma once

// Principal component analysis by thin SVD of the mean-centred data matrix.

#include <Eigen/Dense>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "ternblend/snapshot_io.hpp"

namespace ternblend {

struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components;          // q x n_features, orthonormal rows
  Eigen::VectorXd explained_variance;  // non-increasing
  double total_variance = 0.0;

  int q() const { return static_cast<int>(components.rows()); }
  int n_features() const { return static_cast<int>(mean.size()); }
};

inline void check_finite(const Eigen::MatrixXd& x, const std::string& what) {
  if (!x.allFinite()) throw std::invalid_argument(what + ": non-finite entries");
}

/// Rows of X are samples.
inline PcaModel pca_fit(const Eigen::MatrixXd& x, int q) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n < 2) throw std::invalid_argument("pca: need at least 2 samples");
  if (q < 1 || q > std::min<Eigen::Index>(n - 1, d)) {
    throw std::invalid_argument("pca: q must lie in [1, min(n_samples - 1, n_features)]");
  }
  check_finite(x, "pca");
  PcaModel m;
  m.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centred = x.rowwise() - m.mean.transpose();
  m.total_variance = centred.squaredNorm() / static_cast<double>(n - 1);
  if (!(m.total_variance > 0.0)) throw std::invalid_argument("pca: data has zero variance");

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centred, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  m.components = svd.matrixV().leftCols(q).transpose();
  m.explained_variance = s.head(q).array().square() / static_cast<double>(n - 1);
  // Fix the sign so the largest-magnitude loading of each component is positive.
  for (int r = 0; r < q; ++r) {
    Eigen::Index arg = 0;
    m.components.row(r).cwiseAbs().maxCoeff(&arg);
    if (m.components(r, arg) < 0.0) m.components.row(r) *= -1.0;
  }
  return m;
}

inline Eigen::MatrixXd pca_transform(const PcaModel& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.n_features()) {
    throw std::invalid_argument("pca_transform: expected " + std::to_string(m.n_features()) +
                                " features, got " + std::to_string(x.cols()));
  }
  return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

inline Eigen::MatrixXd pca_reconstruct(const PcaModel& m, const Eigen::MatrixXd& scores) {
  if (scores.cols() != m.q()) throw std::invalid_argument("pca_reconstruct: score width mismatch");
  return (scores * m.components).rowwise() + m.mean.transpose();
}

inline constexpr char kPcaMagic[8] = {'P', 'C', 'A', 'M', '0', '0', '0', '1'};

/// magic, u64 q, u64 n_features, mean, components (row-major), variances.
inline void write_pca(const std::filesystem::path& path, const PcaModel& m) {
  std::ofstream os = detail::open_out(path);
  os.write(kPcaMagic, 8);
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.q()));
  detail::put_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.n_features()));
  for (Eigen::Index k = 0; k < m.mean.size(); ++k) detail::put_le(os, m.mean[k]);
  for (int r = 0; r < m.q(); ++r) {
    for (int c = 0; c < m.n_features(); ++c) detail::put_le(os, m.components(r, c));
  }
  for (int r = 0; r < m.q(); ++r) detail::put_le(os, m.explained_variance[r]);
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline PcaModel read_pca(const std::filesystem::path& path) {
  std::ifstream is = detail::open_in(path);
  const std::string what = "pca model '" + path.string() + "'";
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kPcaMagic, 8) != 0) {
    throw std::runtime_error(what + ": bad magic");
  }
  const auto q = static_cast<Eigen::Index>(detail::get_le<std::uint64_t>(is, what));
  const auto d = static_cast<Eigen::Index>(detail::get_le<std::uint64_t>(is, what));
  PcaModel m;
  m.mean.resize(d);
  m.components.resize(q, d);
  m.explained_variance.resize(q);
  for (Eigen::Index k = 0; k < d; ++k) m.mean[k] = detail::get_le<double>(is, what);
  for (Eigen::Index r = 0; r < q; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) m.components(r, c) = detail::get_le<double>(is, what);
  }
  for (Eigen::Index r = 0; r < q; ++r) m.explained_variance[r] = detail::get_le<double>(is, what);
  return m;
}

}  // namespace ternblend
