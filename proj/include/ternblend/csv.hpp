#pragma once

// Minimal comma-separated tables: no quoting, fields never contain commas.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ternblend {

/// Shortest round-trip decimal form of a double.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k) {
      if (header[k] == name) return k;
    }
    throw std::runtime_error("csv: missing column '" + name + "'");
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open '" + path.string() + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("'" + path.string() + "': empty file");
  t.header = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto row = split_csv_line(line);
    if (row.size() != t.header.size()) {
      throw std::runtime_error("'" + path.string() + "' line " + std::to_string(lineno) +
                               ": expected " + std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(what + ": not a number '" + s + "'");
  }
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const std::string& what) {
  Int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(what + ": not an integer '" + s + "'");
  }
  return v;
}

}  // namespace ternblend
