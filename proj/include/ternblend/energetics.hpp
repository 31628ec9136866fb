#pragma once

// Flory-Huggins thermodynamics of the ternary blend: homogeneous free energy,
// gradient-energy coefficients, chemical-potential differences and the total
// Gibbs functional. Energies are in units of RT; lengths in units of d_p.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ternblend/grid.hpp"

namespace ternblend {

struct BlendParams {
  double n_a = 1000.0;
  double n_b = 1000.0;
  double n_c = 1000.0;
  double chi_ab = 0.006;
  double chi_ac = 0.006;
  double chi_bc = 0.006;
  double r_g = 200e-10;  // m
  double d_p = 200e-10;  // m
  double d_ab = 1e-11;   // m^2/s

  void validate() const {
    if (!(n_a >= 1.0) || !(n_b >= 1.0) || !(n_c >= 1.0)) {
      throw std::invalid_argument("params: chain lengths must be >= 1");
    }
    if (!std::isfinite(chi_ab) || !std::isfinite(chi_ac) || !std::isfinite(chi_bc)) {
      throw std::invalid_argument("params: chi values must be finite");
    }
    if (!(r_g > 0.0) || !(d_p > 0.0) || !(d_ab > 0.0)) {
      throw std::invalid_argument("params: r_g, d_p and d_ab must be positive");
    }
  }

  /// Chain length entering the time scale t = n d_p^2 / D_AB * t~.
  double reference_chain_length() const { return (n_a + n_b + n_c) / 3.0; }

  /// Physical seconds per unit of dimensionless time.
  double time_unit_seconds() const { return reference_chain_length() * d_p * d_p / d_ab; }

  friend bool operator==(const BlendParams&, const BlendParams&) = default;
};

/// Exchanges the roles of species A and B.
inline BlendParams swap_species(const BlendParams& p) {
  BlendParams q = p;
  std::swap(q.n_a, q.n_b);
  std::swap(q.chi_ac, q.chi_bc);
  return q;
}

/// Nondimensional gradient-energy coefficients (kappa / d_p^2).
struct KappaSet {
  double k_a = 0.0;
  double k_b = 0.0;
  double k_ab = 0.0;
};

inline KappaSet kappa_from_chi(const BlendParams& p) {
  const double r2 = (p.r_g / p.d_p) * (p.r_g / p.d_p);
  return KappaSet{
      .k_a = 2.0 / 3.0 * r2 * p.chi_ac,
      .k_b = 2.0 / 3.0 * r2 * p.chi_bc,
      .k_ab = 1.0 / 3.0 * r2 * (p.chi_ac + p.chi_bc - p.chi_ab),
  };
}

inline constexpr double kLogFloor = 1e-9;

/// Logarithm with the argument clamped to [1e-9, 1 - 1e-9]. Transported
/// compositions are never modified; only the log evaluation is protected.
inline double clamped_log(double x) {
  return std::log(std::clamp(x, kLogFloor, 1.0 - kLogFloor));
}

/// Flory-Huggins free energy of mixing per site with all three fractions free.
inline double homog_energy(double a, double b, double c, const BlendParams& p) {
  return a / p.n_a * clamped_log(a) + b / p.n_b * clamped_log(b) +
         c / p.n_c * clamped_log(c) + p.chi_ab * a * b + p.chi_ac * a * c +
         p.chi_bc * b * c;
}

/// Flory-Huggins free energy on the material balance c = 1 - a - b.
inline double homog_energy(double a, double b, const BlendParams& p) {
  return homog_energy(a, b, 1.0 - a - b, p);
}

struct EnergyPartials {
  double dg_da = 0.0;
  double dg_db = 0.0;
  double dg_dc = 0.0;
};

/// Partials with a, b, c treated as independent variables.
inline EnergyPartials dg_partials(double a, double b, const BlendParams& p) {
  const double c = 1.0 - a - b;
  return EnergyPartials{
      .dg_da = (clamped_log(a) + 1.0) / p.n_a + p.chi_ab * b + p.chi_ac * c,
      .dg_db = (clamped_log(b) + 1.0) / p.n_b + p.chi_ab * a + p.chi_bc * c,
      .dg_dc = (clamped_log(c) + 1.0) / p.n_c + p.chi_ac * a + p.chi_bc * b,
  };
}

struct MuFields {
  ScalarField mu_ab;
  ScalarField mu_ac;
  ScalarField mu_bc;
};

inline MuFields mu_differences(const FieldPair& f, const KappaSet& k, const BlendParams& p) {
  const GridSpec& g = f.grid();
  const ScalarField lap_a = laplacian(f.a);
  const ScalarField lap_b = laplacian(f.b);
  MuFields mu{ScalarField(g), ScalarField(g), ScalarField(g)};
  for (std::size_t n = 0; n < g.size(); ++n) {
    const EnergyPartials d = dg_partials(f.a[n], f.b[n], p);
    mu.mu_ab[n] = d.dg_da - d.dg_db - (k.k_a - k.k_ab) * lap_a[n] + (k.k_b - k.k_ab) * lap_b[n];
    mu.mu_ac[n] = d.dg_da - d.dg_dc - k.k_a * lap_a[n] - k.k_ab * lap_b[n];
    mu.mu_bc[n] = d.dg_db - d.dg_dc - k.k_b * lap_b[n] - k.k_ab * lap_a[n];
  }
  return mu;
}

/// Total Gibbs functional (units of RT per unit area of the 2-D domain).
/// Gradients live on cell faces as two-point differences; mirrored ghosts make
/// the zero-flux boundary faces contribute nothing.
inline double gibbs_total(const FieldPair& f, const KappaSet& k, const BlendParams& p) {
  const GridSpec& g = f.grid();
  const double dx = g.dx();
  const double dy = g.dy();
  double bulk = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) bulk += homog_energy(f.a[n], f.b[n], p);

  auto face_density = [&](double ga, double gb) {
    return 0.5 * k.k_a * ga * ga + 0.5 * k.k_b * gb * gb + k.k_ab * ga * gb;
  };
  double gradient = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const int ip = detail::wrap_x(i + 1, g.nx);
      gradient += face_density((f.a(ip, j) - f.a(i, j)) / dx, (f.b(ip, j) - f.b(i, j)) / dx);
      if (j + 1 < g.ny) {
        gradient +=
            face_density((f.a(i, j + 1) - f.a(i, j)) / dy, (f.b(i, j + 1) - f.b(i, j)) / dy);
      }
    }
  }
  return (bulk + gradient) * g.cell_area();
}

}  // namespace ternblend
