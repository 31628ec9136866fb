#pragma once

// Batch sweeps over initial composition and interaction parameters. Runs are
// independent; workers pull from a shared index and results are written once,
// sorted by run id, by the calling thread.

#include <array>
#include <atomic>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ternblend/config_io.hpp"
#include "ternblend/csv.hpp"
#include "ternblend/image.hpp"
#include "ternblend/snapshot_io.hpp"
#include "ternblend/solver.hpp"

namespace ternblend {

using ChiCase = std::array<double, 3>;  // (chi_ab, chi_ac, chi_bc)

inline constexpr double kCompositionMargin = 0.95;

struct SweepSpec {
  std::vector<double> a0_values;
  std::vector<double> b0_values;
  std::vector<ChiCase> chi_cases;
  SimConfig base{};
  std::filesystem::path out_dir = "sweep_out";
  int parallelism = 1;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (a0_values.empty() || b0_values.empty() || chi_cases.empty()) {
      throw std::invalid_argument("sweep: a0_values, b0_values and chi_cases must be non-empty");
    }
    for (const ChiCase& c : chi_cases) {
      for (double v : c) {
        if (!(v >= 0.0 && v <= 0.02)) {
          throw std::invalid_argument("sweep: chi values must lie in [0, 0.02]");
        }
      }
    }
    if (parallelism < 1) throw std::invalid_argument("sweep: parallelism must be >= 1");
  }
};

struct RunRecord {
  std::string run_id;
  double a0 = 0.0, b0 = 0.0;
  double chi_ab = 0.0, chi_ac = 0.0, chi_bc = 0.0;
  double n_a = 0.0, n_b = 0.0, n_c = 0.0;
  std::uint64_t seed = 0;
  StateID state_id = StateID::State3a;
  double gibbs_first = 0.0, gibbs_last = 0.0;
  std::string snapshot_path;  // relative to the sweep directory; empty on failure
  std::string image_path;
  std::string error;          // not persisted

  bool eligible() const { return dataset_eligible(state_id) && !image_path.empty(); }
  ChiCase chi() const { return {chi_ab, chi_ac, chi_bc}; }
};

struct SkippedPoint {
  double a0 = 0.0, b0 = 0.0;
  std::string reason;
};

struct SweepOutcome {
  std::vector<RunRecord> records;  // sorted by run_id
  std::vector<SkippedPoint> skipped;
};

inline const char* kManifestHeader =
    "run_id,a0,b0,chi_ab,chi_ac,chi_bc,n_a,n_b,n_c,seed,state_id,gibbs_first,gibbs_last,"
    "snapshot_path,image_path";

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic per-run seed from the base seed and the run's parameters.
inline std::uint64_t run_seed(std::uint64_t base, double a0, double b0, const ChiCase& chi) {
  std::uint64_t h = detail::mix64(base + 0x9e3779b97f4a7c15ULL);
  for (double v : {a0, b0, chi[0], chi[1], chi[2]}) {
    h = detail::mix64(h ^ (std::bit_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

inline std::string make_run_id(double a0, double b0, const ChiCase& chi) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "a%.4f_b%.4f_x%.4f-%.4f-%.4f", a0, b0, chi[0], chi[1], chi[2]);
  return buf;
}

inline std::string chi_key(const ChiCase& chi) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f-%.4f-%.4f", chi[0], chi[1], chi[2]);
  return buf;
}

struct PlannedRun {
  std::string run_id;
  SimConfig cfg;
  ChiCase chi{};
};

/// Expands the Cartesian product, dropping compositions within the margin.
inline std::vector<PlannedRun> plan_sweep(const SweepSpec& spec, std::vector<SkippedPoint>* skipped) {
  spec.validate();
  std::vector<PlannedRun> plan;
  std::map<std::string, int> seen;
  for (const ChiCase& chi : spec.chi_cases) {
    for (double a0 : spec.a0_values) {
      for (double b0 : spec.b0_values) {
        if (a0 + b0 >= kCompositionMargin) {
          if (skipped && &chi == &spec.chi_cases.front()) {
            skipped->push_back({a0, b0, "a0 + b0 >= 0.95"});
          }
          continue;
        }
        PlannedRun run;
        run.chi = chi;
        run.run_id = make_run_id(a0, b0, chi);
        if (seen[run.run_id]++) {
          throw std::invalid_argument("sweep: duplicate run id " + run.run_id +
                                      " (values closer than 1e-4)");
        }
        run.cfg = spec.base;
        run.cfg.a0 = a0;
        run.cfg.b0 = b0;
        run.cfg.params.chi_ab = chi[0];
        run.cfg.params.chi_ac = chi[1];
        run.cfg.params.chi_bc = chi[2];
        run.cfg.rng_seed = run_seed(spec.base_seed, a0, b0, chi);
        plan.push_back(std::move(run));
      }
    }
  }
  return plan;
}

/// Runs one planned simulation and writes its artefacts under `out_dir`.
inline RunRecord execute_run(const PlannedRun& job, const std::filesystem::path& out_dir) {
  RunRecord rec;
  rec.run_id = job.run_id;
  rec.a0 = job.cfg.a0;
  rec.b0 = job.cfg.b0;
  rec.chi_ab = job.chi[0];
  rec.chi_ac = job.chi[1];
  rec.chi_bc = job.chi[2];
  rec.n_a = job.cfg.params.n_a;
  rec.n_b = job.cfg.params.n_b;
  rec.n_c = job.cfg.params.n_c;
  rec.seed = job.cfg.rng_seed;
  try {
    const SimResult res = ternblend::run(job.cfg);
    rec.state_id = res.state_id;
    rec.gibbs_first = res.gibbs_trace.front().gibbs;
    rec.gibbs_last = res.gibbs_trace.back().gibbs;
    const std::string dir = "runs/" + job.run_id;
    write_snapshot(out_dir / dir / "final.snap", res.final_fields());
    write_png(out_dir / dir / "final.png", render_rgb(res.final_fields()));
    write_gibbs_csv(out_dir / dir / "gibbs.csv", res.gibbs_trace);
    rec.snapshot_path = dir + "/final.snap";
    rec.image_path = dir + "/final.png";
  } catch (const std::exception& e) {
    rec.state_id = StateID::State3a;
    rec.error = e.what();
  }
  return rec;
}

inline std::string manifest_row(const RunRecord& r) {
  std::string s = r.run_id;
  for (double v : {r.a0, r.b0, r.chi_ab, r.chi_ac, r.chi_bc, r.n_a, r.n_b, r.n_c}) {
    s += ',' + fmt_double(v);
  }
  s += ',' + std::to_string(r.seed) + ',' + to_string(r.state_id);
  s += ',' + (r.error.empty() ? fmt_double(r.gibbs_first) : std::string("nan"));
  s += ',' + (r.error.empty() ? fmt_double(r.gibbs_last) : std::string("nan"));
  s += ',' + r.snapshot_path + ',' + r.image_path;
  return s;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<RunRecord>& recs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << kManifestHeader << '\n';
  for (const RunRecord& r : recs) os << manifest_row(r) << '\n';
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline std::vector<RunRecord> read_manifest(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != split_csv_line(kManifestHeader)) {
    throw std::runtime_error("manifest '" + path.string() + "': unexpected header");
  }
  std::vector<RunRecord> out;
  for (const auto& row : t.rows) {
    RunRecord r;
    const std::string what = "manifest row " + row[0];
    r.run_id = row[0];
    double* dst[] = {&r.a0, &r.b0, &r.chi_ab, &r.chi_ac, &r.chi_bc, &r.n_a, &r.n_b, &r.n_c};
    for (int k = 0; k < 8; ++k) *dst[k] = parse_double(row[1 + k], what);
    r.seed = parse_int<std::uint64_t>(row[9], what);
    r.state_id = parse_state(row[10]);
    if (row[11] == "nan") {
      r.error = "run failed";
    } else {
      r.gibbs_first = parse_double(row[11], what);
      r.gibbs_last = parse_double(row[12], what);
    }
    r.snapshot_path = row[13];
    r.image_path = row[14];
    out.push_back(std::move(r));
  }
  return out;
}

using SweepProgress = std::function<void(const RunRecord&, std::size_t done, std::size_t total)>;

/// Executes the sweep and writes manifest.csv and skipped.csv into out_dir.
inline SweepOutcome run_sweep(const SweepSpec& spec, const SweepProgress& progress = {}) {
  SweepOutcome out;
  const std::vector<PlannedRun> plan = plan_sweep(spec, &out.skipped);
  std::filesystem::create_directories(spec.out_dir);

  std::vector<RunRecord> records(plan.size());
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex report;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= plan.size()) return;
      records[k] = execute_run(plan[k], spec.out_dir);
      std::lock_guard lock(report);
      ++done;
      if (progress) progress(records[k], done, plan.size());
    }
  };
  const int workers = std::min<int>(spec.parallelism, std::max<std::size_t>(plan.size(), 1));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::sort(records.begin(), records.end(),
            [](const RunRecord& x, const RunRecord& y) { return x.run_id < y.run_id; });
  write_manifest(spec.out_dir / "manifest.csv", records);

  std::ofstream skip(spec.out_dir / "skipped.csv");
  skip << "a0,b0,reason\n";
  for (const SkippedPoint& s : out.skipped) {
    skip << fmt_double(s.a0) << ',' << fmt_double(s.b0) << ',' << s.reason << '\n';
  }
  out.records = std::move(records);
  return out;
}

inline std::vector<double> read_number_list(ObjectReader& r, const std::string& key) {
  const json* j = r.child(key);
  if (!j) throw ConfigError(r.field(key) + ": required");
  if (!j->is_array()) throw ConfigError(r.field(key) + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j->size(); ++k) {
    if (!(*j)[k].is_number()) {
      throw ConfigError(r.field(key) + "[" + std::to_string(k) + "]: expected a number");
    }
    out.push_back((*j)[k].get<double>());
  }
  return out;
}

/// Sweep spec JSON; see README for the schema.
inline SweepSpec sweep_spec_from_json(const json& j) {
  SweepSpec spec;
  ObjectReader r(j, "");
  spec.a0_values = read_number_list(r, "a0_values");
  spec.b0_values = read_number_list(r, "b0_values");
  const json* cases = r.child("chi_cases");
  if (!cases || !cases->is_array()) throw ConfigError("chi_cases: expected an array of triples");
  for (std::size_t k = 0; k < cases->size(); ++k) {
    const json& c = (*cases)[k];
    const std::string where = "chi_cases[" + std::to_string(k) + "]";
    if (!c.is_array() || c.size() != 3) throw ConfigError(where + ": expected [chi_ab, chi_ac, chi_bc]");
    ChiCase cc{};
    for (int m = 0; m < 3; ++m) {
      if (!c[m].is_number()) throw ConfigError(where + "[" + std::to_string(m) + "]: expected a number");
      cc[m] = c[m].get<double>();
    }
    spec.chi_cases.push_back(cc);
  }
  if (const json* base = r.child("base")) read_into(*base, "base", spec.base);
  std::string out_dir = spec.out_dir.string();
  r.get("out_dir", out_dir);
  spec.out_dir = out_dir;
  r.get("parallelism", spec.parallelism);
  r.get("base_seed", spec.base_seed);
  r.finish();
  return spec;
}

inline json to_json(const SweepSpec& s) {
  json cases = json::array();
  for (const ChiCase& c : s.chi_cases) cases.push_back({c[0], c[1], c[2]});
  return json{{"a0_values", s.a0_values}, {"b0_values", s.b0_values}, {"chi_cases", cases},
              {"base", to_json(s.base)},   {"out_dir", s.out_dir.string()},
              {"parallelism", s.parallelism}, {"base_seed", s.base_seed}};
}

}  // namespace ternblend
