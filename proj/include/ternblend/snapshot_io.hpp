#pragma once

// Binary field snapshots (magic CHSNAP01, little-endian) and the Gibbs-trace CSV.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ternblend/csv.hpp"
#include "ternblend/grid.hpp"
#include "ternblend/solver.hpp"

namespace ternblend {

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put_le(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error(what + ": truncated file");
  }
  return to_little(v);
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  return is;
}

}  // namespace detail

inline constexpr char kSnapshotMagic[8] = {'C', 'H', 'S', 'N', 'A', 'P', '0', '1'};

/// Grid lengths are not stored; the reader takes them from the caller.
inline void write_snapshot(const std::filesystem::path& path, const FieldPair& f) {
  f.validate();
  std::ofstream os = detail::open_out(path);
  os.write(kSnapshotMagic, 8);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid().nx));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(f.grid().ny));
  for (double v : f.a.values()) detail::put_le(os, v);
  for (double v : f.b.values()) detail::put_le(os, v);
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline FieldPair read_snapshot(const std::filesystem::path& path, double lx = 40.0,
                               double ly = 40.0) {
  std::ifstream is = detail::open_in(path);
  const std::string what = "snapshot '" + path.string() + "'";
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kSnapshotMagic, 8) != 0) {
    throw std::runtime_error(what + ": bad magic");
  }
  const auto nx = detail::get_le<std::uint32_t>(is, what);
  const auto ny = detail::get_le<std::uint32_t>(is, what);
  GridSpec g{static_cast<int>(nx), static_cast<int>(ny), lx, ly};
  g.validate();
  std::vector<double> a(g.size()), b(g.size());
  for (double& v : a) v = detail::get_le<double>(is, what);
  for (double& v : b) v = detail::get_le<double>(is, what);
  return FieldPair{ScalarField(g, std::move(a)), ScalarField(g, std::move(b))};
}

inline void write_gibbs_csv(const std::filesystem::path& path,
                            const std::vector<GibbsSample>& trace) {
  std::ofstream os = detail::open_out(path);
  os << "step,t,gibbs\n";
  for (const GibbsSample& s : trace) {
    os << s.step << ',' << fmt_double(s.t) << ',' << fmt_double(s.gibbs) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: '" + path.string() + "'");
}

inline std::vector<GibbsSample> read_gibbs_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header != std::vector<std::string>{"step", "t", "gibbs"}) {
    throw std::runtime_error("gibbs csv '" + path.string() + "': bad header");
  }
  std::vector<GibbsSample> out;
  for (const auto& row : t.rows) {
    out.push_back({parse_int<long>(row[0], "gibbs csv step"), parse_double(row[1], "gibbs csv t"),
                   parse_double(row[2], "gibbs csv gibbs")});
  }
  return out;
}

}  // namespace ternblend
