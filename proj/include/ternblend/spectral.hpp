#pragma once

// Exact diagonalisation of the five-point Laplacian on the periodic-x /
// mirrored-y grid: a real DFT (halfcomplex) along x and a DCT-II along y.
// Used to invert constant-coefficient operators inside the implicit solver.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "ternblend/grid.hpp"

namespace ternblend {

namespace detail {
// FFTW planning is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

class LaplacianSpectrum {
 public:
  explicit LaplacianSpectrum(const GridSpec& grid)
      : grid_(grid), buffer_(grid.size()), eigenvalues_(grid.size()) {
    grid.validate();
    const int nx = grid.nx;
    const int ny = grid.ny;
    for (int j = 0; j < ny; ++j) {
      const double ly = (2.0 - 2.0 * std::cos(std::numbers::pi * j / ny)) / (grid.dy() * grid.dy());
      for (int i = 0; i < nx; ++i) {
        const int k = i <= nx / 2 ? i : nx - i;
        const double lx =
            (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / nx)) / (grid.dx() * grid.dx());
        eigenvalues_[grid.index(i, j)] = lx + ly;
      }
    }
    std::lock_guard lock(detail::fftw_planner_mutex());
    // FFTW_ESTIMATE keeps plan selection, and therefore rounding, deterministic.
    forward_ = fftw_plan_r2r_2d(ny, nx, buffer_.data(), buffer_.data(), FFTW_REDFT10, FFTW_R2HC,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
    inverse_ = fftw_plan_r2r_2d(ny, nx, buffer_.data(), buffer_.data(), FFTW_REDFT01, FFTW_HC2R,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  }

  ~LaplacianSpectrum() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  LaplacianSpectrum(const LaplacianSpectrum&) = delete;
  LaplacianSpectrum& operator=(const LaplacianSpectrum&) = delete;

  const GridSpec& grid() const { return grid_; }

  /// Eigenvalue of -Laplacian for each spectral coefficient (row-major).
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }

  /// Plans are in-place, so the input is copied into `out` first.
  void forward(const double* in, double* out) {
    if (in != out) std::copy(in, in + grid_.size(), out);
    fftw_execute_r2r(forward_, out, out);
  }

  /// Inverse transform including the 1/(2 nx ny) normalisation.
  void inverse(const double* in, double* out) {
    if (in != out) std::copy(in, in + grid_.size(), out);
    fftw_execute_r2r(inverse_, out, out);
    const double scale = 1.0 / (2.0 * grid_.nx * grid_.ny);
    for (std::size_t k = 0; k < grid_.size(); ++k) out[k] *= scale;
  }

 private:
  GridSpec grid_;
  std::vector<double> buffer_;
  std::vector<double> eigenvalues_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace ternblend
