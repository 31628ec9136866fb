// Command-line driver: simulate, sweep, cluster, train, predict-map.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "ternblend/affinity.hpp"
#include "ternblend/config_io.hpp"
#include "ternblend/gpc.hpp"
#include "ternblend/image.hpp"
#include "ternblend/kmeans.hpp"
#include "ternblend/labeler.hpp"
#include "ternblend/pca.hpp"
#include "ternblend/pipeline.hpp"
#include "ternblend/snapshot_io.hpp"
#include "ternblend/solver.hpp"
#include "ternblend/sweep.hpp"

namespace fs = std::filesystem;
using namespace ternblend;

namespace {

struct Globals {
  std::string config;
  std::string out = "out";
  bool out_given = false;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json load_optional_config(const Globals& g) {
  if (g.config.empty()) return json::object();
  return load_json(g.config);
}

void log(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << '\n';
}

// A --config file supplies defaults for a subcommand; explicit flags win.
template <class T>
void overlay(ObjectReader& r, const CLI::App& sub, const std::string& key, const std::string& flag,
             T& target) {
  if (!r.has(key)) return;
  T v{};
  r.get(key, v);
  if (sub.count(flag) == 0) target = v;
}

void overlay_seed(ObjectReader& r, Globals& g) {
  if (!r.has("seed")) return;
  std::uint64_t v = 0;
  r.get("seed", v);
  if (!g.seed) g.seed = v;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Globals& g) {
  if (g.config.empty()) throw UsageError("simulate: --config is required");
  SimConfig cfg;
  read_into(load_json(g.config), "", cfg);
  if (g.seed) cfg.rng_seed = *g.seed;
  validate_config(cfg);
  const fs::path out = g.out;
  fs::create_directories(out);
  save_json(out / "config_resolved.json", to_json(cfg));

  log(g, "simulating " + std::to_string(cfg.step_count()) + " steps on " +
             std::to_string(cfg.grid.nx) + "x" + std::to_string(cfg.grid.ny));
  const SimResult res = run(cfg);
  for (std::size_t k = 0; k < res.snapshots.size(); ++k) {
    const long step = std::lround(res.snapshots[k].t / cfg.dt);
    char name[64];
    std::snprintf(name, sizeof(name), "snapshots/step_%07ld.snap", step);
    write_snapshot(out / name, res.snapshots[k].fields);
  }
  write_snapshot(out / "final.snap", res.final_fields());
  write_png(out / "final.png", render_rgb(res.final_fields()));
  write_gibbs_csv(out / "gibbs.csv", res.gibbs_trace);
  const TraceShape shape = trace_shape(res.gibbs_trace, cfg.t_end);
  json summary{{"state_id", to_string(res.state_id)},
               {"completed", res.completed()},
               {"gibbs_first", res.gibbs_trace.front().gibbs},
               {"gibbs_last", res.gibbs_trace.back().gibbs},
               {"relative_drop", shape.drop},
               {"tail_slope", shape.tail_slope},
               {"steps", res.gibbs_trace.back().step}};
  summary["diverged_at"] = res.diverged_at ? json(*res.diverged_at) : json(nullptr);
  save_json(out / "summary.json", summary);
  std::cout << "state " << to_string(res.state_id) << "  steps " << res.gibbs_trace.back().step
            << "  G " << res.gibbs_trace.front().gibbs << " -> " << res.gibbs_trace.back().gibbs
            << "  wall " << res.wall_time << " s\n";
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_sweep(const Globals& g, const std::string& spec_path, std::optional<int> jobs) {
  const std::string path = !spec_path.empty() ? spec_path : g.config;
  if (path.empty()) throw UsageError("sweep: --spec (or --config) is required");
  SweepSpec spec = sweep_spec_from_json(load_json(path));
  if (jobs) spec.parallelism = *jobs;
  if (g.seed) spec.base_seed = *g.seed;
  if (g.out_given || spec.out_dir.empty()) spec.out_dir = g.out;
  validate_config(spec);
  fs::create_directories(spec.out_dir);
  save_json(spec.out_dir / "config_resolved.json", to_json(spec));

  const SweepOutcome res = run_sweep(spec, [&](const RunRecord& r, std::size_t done, std::size_t total) {
    std::cerr << "[" << done << "/" << total << "] " << r.run_id << " state "
              << to_string(r.state_id) << (r.error.empty() ? "" : "  (" + r.error + ")") << '\n';
  });
  for (const SkippedPoint& s : res.skipped) {
    std::cerr << "skipped a0=" << s.a0 << " b0=" << s.b0 << ": " << s.reason << '\n';
  }
  std::map<std::string, int> tally{{"1", 0}, {"2", 0}, {"3a", 0}, {"3b", 0}};
  for (const RunRecord& r : res.records) ++tally[to_string(r.state_id)];
  std::cout << "runs " << res.records.size() << "  skipped " << res.skipped.size() << "  State1 "
            << tally["1"] << "  State2 " << tally["2"] << "  State3a " << tally["3a"]
            << "  State3b " << tally["3b"] << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ClusterOptions {
  std::string manifest;
  std::string method = "pca-kmeans";
  int q = 10;
  std::string k_range = "1..8";
  std::optional<double> preference;
  double damping = 0.9;
  int image_size = 200;

  json to_json() const {
    json j{{"manifest", manifest}, {"method", method}, {"q", q},
           {"k_range", k_range},   {"damping", damping}, {"image_size", image_size}};
    j["preference"] = preference ? json(*preference) : json(nullptr);
    return j;
  }
};

std::pair<int, int> parse_range(const std::string& s) {
  const std::size_t dots = s.find("..");
  if (dots == std::string::npos) throw ConfigError("k-range: expected 'min..max', got '" + s + "'");
  return {parse_int<int>(s.substr(0, dots), "k-range"), parse_int<int>(s.substr(dots + 2), "k-range")};
}

void write_scatter(const fs::path& path, const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
  const int size = 400;
  const int margin = 20;
  RgbImage img(size, size);
  std::fill(img.pixels.begin(), img.pixels.end(), 255);
  const Eigen::Index n = scores.rows();
  const bool two = scores.cols() >= 2;
  double x_lo = scores.col(0).minCoeff(), x_hi = scores.col(0).maxCoeff();
  double y_lo = two ? scores.col(1).minCoeff() : 0.0, y_hi = two ? scores.col(1).maxCoeff() : 0.0;
  if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
  if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = (scores(i, 0) - x_lo) / (x_hi - x_lo);
    const double v = two ? (scores(i, 1) - y_lo) / (y_hi - y_lo) : 0.5;
    const int cx = margin + static_cast<int>(u * (size - 2 * margin - 1));
    const int cy = size - 1 - margin - static_cast<int>(v * (size - 2 * margin - 1));
    const auto rgb = palette_color(labels[i]);
    for (int dy = -3; dy <= 3; ++dy) {
      for (int dx = -3; dx <= 3; ++dx) {
        if (dx * dx + dy * dy > 9) continue;
        for (int ch = 0; ch < 3; ++ch) img.at(cx + dx, cy + dy, ch) = rgb[ch];
      }
    }
  }
  write_png(path, img);
}

int cmd_cluster(Globals g, ClusterOptions opt, const CLI::App& sub) {
  if (const json cfg = load_optional_config(g); !cfg.empty()) {
    ObjectReader r(cfg, "");
    overlay(r, sub, "manifest", "--manifest", opt.manifest);
    overlay(r, sub, "method", "--method", opt.method);
    overlay(r, sub, "q", "--q", opt.q);
    overlay(r, sub, "k_range", "--k-range", opt.k_range);
    if (const json* pref = r.child("preference"); pref && sub.count("--preference") == 0) {
      if (pref->is_number()) {
        opt.preference = pref->get<double>();
      } else if (!pref->is_null()) {
        throw ConfigError("preference: expected a number or null");
      }
    }
    overlay(r, sub, "damping", "--damping", opt.damping);
    overlay(r, sub, "image_size", "--image-size", opt.image_size);
    overlay_seed(r, g);
    r.finish();
  }
  if (opt.manifest.empty()) throw UsageError("cluster: --manifest is required");
  if (opt.method != "pca-kmeans" && opt.method != "affinity" && opt.method != "rules") {
    throw ConfigError("method: expected pca-kmeans, affinity or rules");
  }
  const auto [k_min, k_max] = parse_range(opt.k_range);
  const fs::path out = g.out;
  fs::create_directories(out);
  json resolved = opt.to_json();
  resolved["seed"] = g.seed.value_or(0);
  save_json(out / "config_resolved.json", resolved);

  const fs::path root = fs::path(opt.manifest).parent_path();
  const std::vector<RunRecord> recs = eligible_records(read_manifest(opt.manifest));
  if (recs.size() < 2) {
    throw std::runtime_error("cluster: manifest has " + std::to_string(recs.size()) +
                             " dataset-eligible rows; need at least 2");
  }
  log(g, "loading " + std::to_string(recs.size()) + " images");
  const Eigen::MatrixXd x = feature_matrix(recs, root, opt.image_size, opt.image_size);
  const std::uint64_t seed = g.seed.value_or(0);

  std::vector<int> labels;
  std::optional<PcaModel> pca;
  Eigen::MatrixXd scores;
  const bool has_variance = (x.rowwise() - x.colwise().mean()).squaredNorm() > 0.0;
  if (has_variance) {
    const int q = std::min<int>(opt.q, static_cast<int>(std::min<Eigen::Index>(x.rows() - 1, x.cols())));
    pca = pca_fit(x, q);
    scores = pca_transform(*pca, x);
    write_pca(out / "pca.pcam", *pca);
  } else {
    scores = Eigen::MatrixXd::Zero(x.rows(), 1);
  }

  json summary{{"method", opt.method}, {"n_samples", recs.size()}};
  if (opt.method == "pca-kmeans") {
    const int hi = std::min<int>(k_max, static_cast<int>(x.rows()));
    int k_star = k_min;
    std::ofstream w(out / "wcss.csv");
    w << "k,wcss\n";
    if (hi >= k_min + 2) {
      const ElbowResult elbow = elbow_select(scores, k_min, hi, seed);
      for (std::size_t m = 0; m < elbow.ks.size(); ++m) {
        w << elbow.ks[m] << ',' << fmt_double(elbow.wcss[m]) << '\n';
      }
      k_star = elbow.k_star;
      summary["flat"] = elbow.flat;
    } else {
      for (int k = k_min; k <= hi; ++k) w << k << ',' << fmt_double(kmeans(scores, k, seed).wcss) << '\n';
    }
    const ClusterResult cr = kmeans(scores, k_star, seed);
    labels = cr.labels;
    summary["k"] = cr.k;
    summary["wcss"] = cr.wcss;
  } else if (opt.method == "affinity") {
    AffinityOptions ao;
    ao.preference = opt.preference;
    ao.damping = opt.damping;
    ao.seed = seed;
    const ClusterResult cr = affinity_propagation(scores, ao);
    labels = cr.labels;
    summary["k"] = cr.k;
    summary["converged"] = cr.converged;
    summary["exemplars"] = cr.exemplars;
  } else {
    labels = rule_labels(recs, root);
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    json names = json::object();
    for (const auto& [l, n] : counts) names[std::to_string(l)] = label_name(l);
    summary["k"] = counts.size();
    summary["label_names"] = names;
  }
  std::vector<std::string> ids;
  for (const RunRecord& r : recs) ids.push_back(r.run_id);
  write_labels_csv(out / "labels.csv", ids, labels);
  write_scatter(out / "scatter.png", scores, labels);
  save_json(out / "cluster_summary.json", summary);
  std::cout << "clustered " << recs.size() << " runs into " << summary["k"] << " clusters ("
            << opt.method << ")\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string manifest;
  std::string labels;
  double length_scale = 1.0;
  bool optimize = false;
  double test_fraction = 0.2;
};

int cmd_train(Globals g, TrainOptions opt, const CLI::App& sub) {
  AugmentationConfig aug_cfg;
  if (const json cfg = load_optional_config(g); !cfg.empty()) {
    ObjectReader r(cfg, "");
    overlay(r, sub, "manifest", "--manifest", opt.manifest);
    overlay(r, sub, "labels", "--labels", opt.labels);
    overlay(r, sub, "length_scale", "--length-scale", opt.length_scale);
    overlay(r, sub, "optimize_length_scale", "--optimize-length-scale", opt.optimize);
    overlay(r, sub, "test_fraction", "--test-fraction", opt.test_fraction);
    if (r.has("augment_offsets")) aug_cfg.offsets = read_number_list(r, "augment_offsets");
    overlay_seed(r, g);
    r.finish();
  }
  validate_config(aug_cfg);
  if (!(opt.test_fraction > 0.0 && opt.test_fraction < 1.0)) {
    throw ConfigError("test_fraction: expected a value in (0, 1)");
  }
  if (opt.manifest.empty() || opt.labels.empty()) {
    throw UsageError("train: --manifest and --labels are required");
  }
  const fs::path out = g.out;
  fs::create_directories(out);
  const std::uint64_t seed = g.seed.value_or(0);
  save_json(out / "config_resolved.json",
            json{{"manifest", opt.manifest},
                 {"labels", opt.labels},
                 {"length_scale", opt.length_scale},
                 {"optimize_length_scale", opt.optimize},
                 {"test_fraction", opt.test_fraction},
                 {"augment_offsets", aug_cfg.offsets},
                 {"seed", seed}});

  const auto slices = points_by_slice(read_manifest(opt.manifest), read_labels_csv(opt.labels));
  if (slices.empty()) throw std::runtime_error("train: no labelled runs found in the manifest");
  json summary = json::object();
  for (const auto& [key, pts] : slices) {
    if (pts.size() < 2) {
      std::cout << "slice " << key << ": only " << pts.size() << " labelled run, skipped\n";
      continue;
    }
    const TrainTestSplit split = split_train_test(pts, opt.test_fraction, seed);
    const AugmentResult aug = augment(split.train, aug_cfg);
    GpcOptions go;
    go.length_scale = opt.length_scale;
    go.optimize_length_scale = opt.optimize;
    const GpcModel model = gpc_fit(aug.points, go);
    const double acc = evaluate(model, split.test);
    write_gpc(out / ("model_" + key + ".gpcm"), model);
    summary[key] = json{{"originals", pts.size()},     {"train_rows", aug.points.size()},
                        {"dropped", aug.dropped},      {"test", split.test.size()},
                        {"classes", model.classes},    {"length_scale", model.length_scale},
                        {"accuracy", acc}};
    std::cout << "slice " << key << ": train " << aug.points.size() << " (dropped " << aug.dropped
              << ")  test " << split.test.size() << "  accuracy " << acc << '\n';
  }
  save_json(out / "train_summary.json", summary);
  return 0;
}

// ---------------------------------------------------------------------------

struct MapOptions {
  std::string model;
  std::vector<double> a_range{0.1, 0.8};
  std::vector<double> b_range{0.1, 0.45};
  int n_a = 141;
  int n_b = 71;
  int scale = 4;
};

int cmd_predict_map(const Globals& g, MapOptions opt, const CLI::App& sub) {
  if (const json cfg = load_optional_config(g); !cfg.empty()) {
    ObjectReader r(cfg, "");
    overlay(r, sub, "model", "--model", opt.model);
    for (auto [key, flag, range] : {std::tuple{"a_range", "--a-range", &opt.a_range},
                                    std::tuple{"b_range", "--b-range", &opt.b_range}}) {
      if (!r.has(key)) continue;
      std::vector<double> v = read_number_list(r, key);
      if (sub.count(flag) == 0) *range = std::move(v);
    }
    overlay(r, sub, "n_a", "--na", opt.n_a);
    overlay(r, sub, "n_b", "--nb", opt.n_b);
    overlay(r, sub, "scale", "--scale", opt.scale);
    r.finish();
  }
  if (opt.a_range.size() != 2 || opt.b_range.size() != 2) {
    throw ConfigError("a_range/b_range: expected two numbers each");
  }
  if (opt.model.empty()) throw UsageError("predict-map: --model is required");
  const fs::path out = g.out;
  fs::create_directories(out);
  save_json(out / "config_resolved.json",
            json{{"model", opt.model}, {"a_range", opt.a_range},
                 {"b_range", opt.b_range},   {"n_a", opt.n_a},     {"n_b", opt.n_b},
                 {"scale", opt.scale}});
  const GpcModel model = read_gpc(opt.model);
  const PredictionMap map = prediction_map(model, opt.a_range[0], opt.a_range[1], opt.b_range[0],
                                           opt.b_range[1], opt.n_a, opt.n_b);
  write_map_csv(out / "map.csv", map);
  write_png(out / "map.png", render_map(map, model.classes, opt.scale));
  write_legend(out / "map_legend.csv", model.classes);
  std::cout << "map " << opt.n_a << "x" << opt.n_b << " over " << model.classes.size()
            << " classes written to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ternary polymer-blend demixing: simulation, sweeps and morphology learning"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  app.add_option("--config", g.config, "JSON configuration file");
  auto* out_opt = app.add_option("--out", g.out, "Output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed override");
  app.add_flag("--verbose,-v", g.verbose, "Progress output on stderr");

  auto* sim = app.add_subcommand("simulate", "Run one simulation");

  auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
  std::string spec_path;
  int jobs = 0;
  sweep->add_option("--spec", spec_path, "Sweep spec JSON");
  auto* jobs_opt = sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* cluster = app.add_subcommand("cluster", "Cluster morphology images of a sweep");
  ClusterOptions copt;
  double preference = 0.0;
  cluster->add_option("--manifest", copt.manifest, "Sweep manifest.csv");
  cluster->add_option("--method", copt.method, "pca-kmeans | affinity | rules")
      ->check(CLI::IsMember({"pca-kmeans", "affinity", "rules"}));
  cluster->add_option("--q", copt.q, "Retained principal components")->check(CLI::PositiveNumber);
  cluster->add_option("--k-range", copt.k_range, "k range for the elbow search, min..max");
  auto* pref_opt = cluster->add_option("--preference", preference, "Affinity preference");
  cluster->add_option("--damping", copt.damping, "Affinity damping");
  cluster->add_option("--image-size", copt.image_size, "Resampled image edge length")
      ->check(CLI::PositiveNumber);

  auto* train = app.add_subcommand("train", "Train one classifier per interaction slice");
  TrainOptions topt;
  train->add_option("--manifest", topt.manifest, "Sweep manifest.csv");
  train->add_option("--labels", topt.labels, "Labels CSV (run_id,label)");
  train->add_option("--length-scale", topt.length_scale, "RBF length scale")
      ->check(CLI::PositiveNumber);
  train->add_flag("--optimize-length-scale", topt.optimize, "Fit the length scale by evidence");
  train->add_option("--test-fraction", topt.test_fraction, "Held-out fraction of original runs");

  auto* pmap = app.add_subcommand("predict-map", "Render a prediction map from a model");
  MapOptions mopt;
  pmap->add_option("--model", mopt.model, "Model file (.gpcm)");
  pmap->add_option("--a-range", mopt.a_range, "a0 range lo hi")->expected(2);
  pmap->add_option("--b-range", mopt.b_range, "b0 range lo hi")->expected(2);
  pmap->add_option("--na", mopt.n_a, "Grid points along a0");
  pmap->add_option("--nb", mopt.n_b, "Grid points along b0");
  pmap->add_option("--scale", mopt.scale, "Pixels per map cell")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (seed_opt->count()) g.seed = seed_value;
  g.out_given = out_opt->count() > 0;
  if (pref_opt->count()) copt.preference = preference;

  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (sweep->parsed()) {
      return cmd_sweep(g, spec_path, jobs_opt->count() ? std::optional<int>(jobs) : std::nullopt);
    }
    if (cluster->parsed()) return cmd_cluster(g, copt, *cluster);
    if (train->parsed()) return cmd_train(g, topt, *train);
    if (pmap->parsed()) return cmd_predict_map(g, mopt, *pmap);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
