#pragma once

// Structured cell-centred grid, scalar fields and the discrete operators used
// by the transport model. The x axis is periodic; the y axis carries a
// zero-flux (Neumann) condition realised by mirrored ghost cells that are
// never stored.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ternblend {

struct GridSpec {
  int nx = 80;
  int ny = 80;
  double lx = 40.0;
  double ly = 40.0;

  double dx() const { return lx / nx; }
  double dy() const { return ly / ny; }
  double cell_area() const { return dx() * dy(); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * ny; }

  /// Row-major index of column i (x) and row j (y).
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * nx + i;
  }

  void validate() const {
    if (nx < 4 || ny < 4) {
      throw std::invalid_argument("grid: nx and ny must be >= 4");
    }
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
      throw std::invalid_argument("grid: domain lengths must be positive");
    }
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Periodic in x, zero-flux in y. The only supported combination.
struct BoundarySpec {};

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const GridSpec& grid, double fill = 0.0)
      : grid_(grid), values_(grid.size(), fill) {}
  ScalarField(const GridSpec& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw std::invalid_argument("ScalarField: value count does not match grid");
    }
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(int i, int j) { return values_[grid_.index(i, j)]; }
  double operator()(int i, int j) const { return values_[grid_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool all_finite() const {
    for (double v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }
  double mean() const { return sum() / static_cast<double>(values_.size()); }

  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (double v : values_) s += (v - m) * (v - m);
    return s / static_cast<double>(values_.size());
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  friend bool operator==(const ScalarField&, const ScalarField&) = default;

 private:
  GridSpec grid_{};
  std::vector<double> values_;
};

/// Mole fractions of species A and B; C follows from the material balance.
struct FieldPair {
  ScalarField a;
  ScalarField b;

  const GridSpec& grid() const { return a.grid(); }

  ScalarField c() const {
    ScalarField out(a.grid());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = 1.0 - a[k] - b[k];
    return out;
  }

  void validate() const {
    if (!(a.grid() == b.grid())) {
      throw std::invalid_argument("FieldPair: a and b must share one grid");
    }
  }

  friend bool operator==(const FieldPair&, const FieldPair&) = default;
};

namespace detail {

inline int wrap_x(int i, int nx) {
  if (i < 0) return i + nx;
  if (i >= nx) return i - nx;
  return i;
}

// Mirrored ghost row for the zero-flux axis.
inline int mirror_y(int j, int ny) {
  if (j < 0) return 0;
  if (j >= ny) return ny - 1;
  return j;
}

}  // namespace detail

/// Five-point Laplacian: periodic wrap in x, mirrored ghosts in y.
inline ScalarField laplacian(const ScalarField& f, BoundarySpec = {}) {
  const GridSpec& g = f.grid();
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dy() * g.dy());
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j) {
    const int jm = detail::mirror_y(j - 1, g.ny);
    const int jp = detail::mirror_y(j + 1, g.ny);
    for (int i = 0; i < g.nx; ++i) {
      const int im = detail::wrap_x(i - 1, g.nx);
      const int ip = detail::wrap_x(i + 1, g.nx);
      const double centre = f(i, j);
      out(i, j) = (f(ip, j) - 2.0 * centre + f(im, j)) * idx2 +
                  (f(i, jp) - 2.0 * centre + f(i, jm)) * idy2;
    }
  }
  return out;
}

/// Conservative discretisation of div(m grad mu). Face mobility is the
/// arithmetic mean of the two adjacent cells; boundary faces in y carry no flux.
inline ScalarField div_mobility_grad(const ScalarField& m, const ScalarField& mu,
                                     BoundarySpec = {}) {
  const GridSpec& g = mu.grid();
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dy() * g.dy());
  ScalarField out(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int im = detail::wrap_x(i - 1, g.nx);
      const int ip = detail::wrap_x(i + 1, g.nx);
      const double mc = m(i, j);
      const double uc = mu(i, j);
      const double east = 0.5 * (mc + m(ip, j)) * (mu(ip, j) - uc);
      const double west = 0.5 * (m(im, j) + mc) * (uc - mu(im, j));
      double north = 0.0;
      double south = 0.0;
      if (j + 1 < g.ny) north = 0.5 * (mc + m(i, j + 1)) * (mu(i, j + 1) - uc);
      if (j > 0) south = 0.5 * (m(i, j - 1) + mc) * (uc - mu(i, j - 1));
      out(i, j) = (east - west) * idx2 + (north - south) * idy2;
    }
  }
  return out;
}

/// Circular shift along the periodic axis: out(i, j) = f(i - shift, j).
inline ScalarField shift_x(const ScalarField& f, int shift) {
  const GridSpec& g = f.grid();
  ScalarField out(g);
  const int s = ((shift % g.nx) + g.nx) % g.nx;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) out((i + s) % g.nx, j) = f(i, j);
  }
  return out;
}

/// Cell-area-weighted integral over the domain.
inline double integrate(const ScalarField& f) { return f.sum() * f.grid().cell_area(); }

}  // namespace ternblend
