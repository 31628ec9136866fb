#pragma once

// Rule-based morphology labels: which species forms the continuous phase, and
// whether the remaining phases are dispersed droplets or also percolate.
//
// Each cell is assigned to its locally dominant species. The continuous phase
// is the species dominating the largest area. A dominance region percolates
// when one connected component (4-neighbour, periodic in x) touches both
// y boundaries or reaches every column. The structure is bicontinuous when
// some other species percolates as well, dispersed otherwise, and uniform
// when the field carries no appreciable pattern.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ternblend/grid.hpp"

namespace ternblend {

enum class Structure { Dispersed = 0, Bicontinuous = 1, Uniform = 2 };

struct MorphologyLabel {
  int continuous = 0;  // 0 = A, 1 = B, 2 = C
  Structure structure = Structure::Uniform;

  int id() const { return continuous * 3 + static_cast<int>(structure); }
  std::string name() const {
    static const char* species[] = {"A", "B", "C"};
    static const char* kinds[] = {"dispersed", "bicontinuous", "uniform"};
    return std::string(species[continuous]) + "-" + kinds[static_cast<int>(structure)];
  }
};

inline std::string label_name(int id) {
  if (id < 0 || id >= 9) return "label" + std::to_string(id);
  return MorphologyLabel{id / 3, static_cast<Structure>(id % 3)}.name();
}

struct LabelerOptions {
  double uniform_std = 0.05;  // max per-species spatial std of a pattern-free field
};

namespace detail {

inline bool percolates(const std::vector<int>& owner, int species, const GridSpec& g) {
  std::vector<int> comp(g.size(), -1);
  std::vector<std::size_t> stack;
  int next = 0;
  for (std::size_t start = 0; start < g.size(); ++start) {
    if (owner[start] != species || comp[start] >= 0) continue;
    bool bottom = false, top = false;
    std::vector<char> cols(g.nx, 0);
    int ncols = 0;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      const int i = static_cast<int>(c % g.nx);
      const int j = static_cast<int>(c / g.nx);
      bottom = bottom || j == 0;
      top = top || j == g.ny - 1;
      if (!cols[i]) {
        cols[i] = 1;
        ++ncols;
      }
      const std::size_t nb[4] = {g.index(wrap_x(i + 1, g.nx), j), g.index(wrap_x(i - 1, g.nx), j),
                                 j + 1 < g.ny ? g.index(i, j + 1) : c,
                                 j > 0 ? g.index(i, j - 1) : c};
      for (std::size_t m : nb) {
        if (owner[m] == species && comp[m] < 0) {
          comp[m] = next;
          stack.push_back(m);
        }
      }
    }
    if ((bottom && top) || ncols == g.nx) return true;
    ++next;
  }
  return false;
}

}  // namespace detail

inline MorphologyLabel label_morphology(const FieldPair& f, const LabelerOptions& opt = {}) {
  f.validate();
  const GridSpec& g = f.grid();
  const ScalarField c = f.c();
  std::vector<int> owner(g.size());
  std::array<long, 3> area{0, 0, 0};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const std::array<double, 3> x{f.a[k], f.b[k], c[k]};
    owner[k] = static_cast<int>(std::max_element(x.begin(), x.end()) - x.begin());
    ++area[owner[k]];
  }
  MorphologyLabel out;
  out.continuous = static_cast<int>(std::max_element(area.begin(), area.end()) - area.begin());
  const double spread =
      std::sqrt(std::max({f.a.variance(), f.b.variance(), c.variance()}));
  if (spread < opt.uniform_std) {
    out.structure = Structure::Uniform;
    return out;
  }
  out.structure = Structure::Dispersed;
  for (int s = 0; s < 3; ++s) {
    if (s != out.continuous && area[s] > 0 && detail::percolates(owner, s, g)) {
      out.structure = Structure::Bicontinuous;
      break;
    }
  }
  return out;
}

}  // namespace ternblend
