#pragma once

// Glue between pipeline stages: manifest rows to feature matrices, label
// files, rule-based labelling and per-slice training sets.

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ternblend/csv.hpp"
#include "ternblend/gpc.hpp"
#include "ternblend/image.hpp"
#include "ternblend/labeler.hpp"
#include "ternblend/snapshot_io.hpp"
#include "ternblend/sweep.hpp"

namespace ternblend {

/// Dataset-eligible rows (States 1 and 3b with an image on record).
inline std::vector<RunRecord> eligible_records(const std::vector<RunRecord>& all) {
  std::vector<RunRecord> out;
  for (const RunRecord& r : all) {
    if (r.eligible()) out.push_back(r);
  }
  return out;
}

/// One preprocessed image per row; paths are relative to `root`.
inline Eigen::MatrixXd feature_matrix(const std::vector<RunRecord>& recs,
                                      const std::filesystem::path& root, int width = 200,
                                      int height = 200) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(recs.size()), 3 * width * height);
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const std::vector<double> v = preprocess(read_png(root / recs[k].image_path), width, height);
    x.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), v.size());
  }
  return x;
}

inline void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                             const std::vector<int>& labels) {
  std::ofstream os = detail::open_out(path);
  os << "run_id,label\n";
  for (std::size_t k = 0; k < ids.size(); ++k) os << ids[k] << ',' << labels[k] << '\n';
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline std::map<std::string, int> read_labels_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t id = t.column("run_id");
  const std::size_t lab = t.column("label");
  std::map<std::string, int> out;
  for (const auto& row : t.rows) {
    if (!out.emplace(row[id], parse_int<int>(row[lab], "label of " + row[id])).second) {
      throw std::runtime_error("labels: duplicate run_id " + row[id]);
    }
  }
  return out;
}

/// Rule-based label of each record's final snapshot.
inline std::vector<int> rule_labels(const std::vector<RunRecord>& recs,
                                    const std::filesystem::path& root,
                                    const LabelerOptions& opt = {}) {
  std::vector<int> out;
  for (const RunRecord& r : recs) {
    out.push_back(label_morphology(read_snapshot(root / r.snapshot_path), opt).id());
  }
  return out;
}

/// Labelled compositions grouped by interaction-parameter slice. Records
/// without a label are ignored.
inline std::map<std::string, std::vector<LabeledPoint>> points_by_slice(
    const std::vector<RunRecord>& recs, const std::map<std::string, int>& labels) {
  std::map<std::string, std::vector<LabeledPoint>> out;
  for (const RunRecord& r : recs) {
    const auto it = labels.find(r.run_id);
    if (it == labels.end()) continue;
    out[chi_key(r.chi())].push_back({r.a0, r.b0, it->second, r.chi(), -1});
  }
  return out;
}

}  // namespace ternblend
