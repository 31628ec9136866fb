#pragma once

// Backward-Euler integration of the nondimensional ternary transport system
//
//   da/dt = n div(ab grad mu_AB + ac grad mu_AC)
//   db/dt = n div(-ab grad mu_AB + bc grad mu_BC)
//
// where n is the reference chain length from the time scaling. Each implicit
// step is solved by Picard sweeps: mobilities and the interaction part of the
// chemical potential are frozen at the current iterate, the entropic part is
// linearised cell by cell, and the remaining linear fourth-order system is
// solved by BiCGStab preconditioned with its constant-coefficient (spectrally
// exact) counterpart.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ternblend/energetics.hpp"
#include "ternblend/grid.hpp"
#include "ternblend/spectral.hpp"

namespace ternblend {

struct SimConfig {
  GridSpec grid{};
  BlendParams params{};
  double a0 = 1.0 / 3.0;
  double b0 = 1.0 / 3.0;
  double t_end = 50.0;
  double dt = 0.02;
  double noise_amp = 0.005;
  std::uint64_t rng_seed = 0;
  int snapshot_every = 500;
  double newton_tol = 1e-9;
  int newton_max_iter = 60;
  double picard_damping = 1.0;
  double linear_tol = 1e-10;

  long step_count() const { return std::lround(t_end / dt); }

  void validate() const {
    grid.validate();
    params.validate();
    if (!(a0 > 0.0) || !(b0 > 0.0) || !(a0 + b0 < 1.0)) {
      throw std::invalid_argument("config: need a0 > 0, b0 > 0, a0 + b0 < 1");
    }
    if (!(dt > 0.0) || !(t_end >= dt)) {
      throw std::invalid_argument("config: need dt > 0 and t_end >= dt");
    }
    if (!(noise_amp >= 0.0)) throw std::invalid_argument("config: noise_amp must be >= 0");
    if (a0 - noise_amp <= 0.0 || a0 + noise_amp >= 1.0 || b0 - noise_amp <= 0.0 ||
        b0 + noise_amp >= 1.0 || 1.0 - a0 - b0 - 2.0 * noise_amp <= 0.0) {
      throw std::invalid_argument("config: noise_amp pushes the initial state out of the simplex");
    }
    if (snapshot_every < 0) throw std::invalid_argument("config: snapshot_every must be >= 0");
    if (!(newton_tol > 0.0) || newton_max_iter < 1) {
      throw std::invalid_argument("config: newton_tol > 0 and newton_max_iter >= 1 required");
    }
    if (!(picard_damping > 0.0) || picard_damping > 1.0) {
      throw std::invalid_argument("config: picard_damping must lie in (0, 1]");
    }
    const KappaSet k = kappa_from_chi(params);
    if (k.k_a < 0.0 || k.k_b < 0.0 || k.k_a * k.k_b - k.k_ab * k.k_ab < -1e-15) {
      throw std::invalid_argument("config: gradient-energy matrix is not positive semidefinite");
    }
  }
};

enum class StateID { State1, State2, State3a, State3b };

inline std::string to_string(StateID s) {
  switch (s) {
    case StateID::State1: return "1";
    case StateID::State2: return "2";
    case StateID::State3a: return "3a";
    case StateID::State3b: return "3b";
  }
  return "?";
}

inline StateID parse_state(const std::string& s) {
  if (s == "1") return StateID::State1;
  if (s == "2") return StateID::State2;
  if (s == "3a") return StateID::State3a;
  if (s == "3b") return StateID::State3b;
  throw std::invalid_argument("unknown state id '" + s + "'");
}

/// Runs in States 1 and 3b carry a usable morphology.
inline bool dataset_eligible(StateID s) { return s == StateID::State1 || s == StateID::State3b; }

struct Snapshot {
  double t = 0.0;
  FieldPair fields;
};

struct GibbsSample {
  long step = 0;
  double t = 0.0;
  double gibbs = 0.0;
};

struct SimResult {
  std::vector<Snapshot> snapshots;
  std::vector<GibbsSample> gibbs_trace;
  StateID state_id = StateID::State3a;
  std::optional<double> diverged_at;
  double wall_time = 0.0;
  long picard_sweeps = 0;
  long linear_iterations = 0;

  bool completed() const { return !diverged_at.has_value(); }
  const FieldPair& final_fields() const { return snapshots.back().fields; }
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(double t, const std::string& why)
      : std::runtime_error("diverged at t=" + std::to_string(t) + ": " + why), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

// ---------------------------------------------------------------------------
// Initial state

namespace detail {

/// splitmix64; a fixed, portable stream for initial noise.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [-1, 1).
  double symmetric_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-52 - 1.0; }

 private:
  std::uint64_t state_;
};

}  // namespace detail

inline FieldPair initialize(const SimConfig& cfg) {
  cfg.validate();
  const GridSpec& g = cfg.grid;
  detail::SplitMix64 rng(cfg.rng_seed);
  auto noisy = [&](double base) {
    ScalarField f(g);
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = cfg.noise_amp * rng.symmetric_unit();
    const double m = f.mean();
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = base + (f[k] - m);
    return f;
  };
  FieldPair out{noisy(cfg.a0), noisy(cfg.b0)};
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (out.a[k] <= 0.0 || out.b[k] <= 0.0 || 1.0 - out.a[k] - out.b[k] <= 0.0) {
      throw std::invalid_argument("config: initial noise produced a non-positive fraction");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transport residual in the form written above, built from the public
// operators. Used as the convergence measure of every implicit step.

inline double mobility_fraction(double x) { return std::clamp(x, 0.0, 1.0); }

struct MobilityFields {
  ScalarField ab;
  ScalarField ac;
  ScalarField bc;
};

/// Cell mobilities ab, ac, bc; fractions are clamped to [0, 1] so mobilities
/// stay non-negative when the scheme overshoots slightly.
inline MobilityFields cell_mobilities(const FieldPair& f) {
  const GridSpec& g = f.grid();
  MobilityFields m{ScalarField(g), ScalarField(g), ScalarField(g)};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double a = mobility_fraction(f.a[k]);
    const double b = mobility_fraction(f.b[k]);
    const double c = mobility_fraction(1.0 - f.a[k] - f.b[k]);
    m.ab[k] = a * b;
    m.ac[k] = a * c;
    m.bc[k] = b * c;
  }
  return m;
}

/// Right-hand sides (da/dt, db/dt) of the transport system.
inline FieldPair transport_rate(const FieldPair& f, const KappaSet& k, const BlendParams& p) {
  const MuFields mu = mu_differences(f, k, p);
  const MobilityFields m = cell_mobilities(f);
  const double n = p.reference_chain_length();
  ScalarField da = div_mobility_grad(m.ab, mu.mu_ab);
  ScalarField da2 = div_mobility_grad(m.ac, mu.mu_ac);
  ScalarField db = div_mobility_grad(m.ab, mu.mu_ab);
  ScalarField db2 = div_mobility_grad(m.bc, mu.mu_bc);
  for (std::size_t c = 0; c < da.size(); ++c) {
    da[c] = n * (da[c] + da2[c]);
    db[c] = n * (-db[c] + db2[c]);
  }
  return FieldPair{std::move(da), std::move(db)};
}

/// Max-norm of the backward-Euler residual u - u_prev - dt * rate(u).
inline double backward_euler_residual(const FieldPair& u, const FieldPair& u_prev, double dt,
                                      const KappaSet& k, const BlendParams& p) {
  const FieldPair rate = transport_rate(u, k, p);
  double r = 0.0;
  for (std::size_t c = 0; c < u.a.size(); ++c) {
    r = std::max(r, std::abs(u.a[c] - u_prev.a[c] - dt * rate.a[c]));
    r = std::max(r, std::abs(u.b[c] - u_prev.b[c] - dt * rate.b[c]));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Implicit stepper

struct StepStats {
  int sweeps = 0;
  int linear_iterations = 0;
  double residual = 0.0;
};

class ImplicitStepper {
 public:
  ImplicitStepper(const SimConfig& cfg, const KappaSet& kappa)
      : cfg_(cfg), kappa_(kappa), grid_(cfg.grid), spectrum_(cfg.grid), n_cells_(cfg.grid.size()) {
    cfg.validate();
    mobility_scale_ = cfg.params.reference_chain_length();
    const std::size_t n2 = 2 * n_cells_;
    for (auto* v : {&x_, &r_, &r0_, &z_, &p_, &q_, &v_, &cp_, &cr_, &cq_, &rhs_, &e_, &tmp_}) v->resize(n2);
    for (auto* v : {&fx_aa_, &fx_ab_, &fx_bb_, &fy_aa_, &fy_ab_, &fy_bb_, &h_aa_, &h_ab_, &h_bb_}) {
      v->resize(n_cells_);
    }
    spec_a_.resize(n_cells_);
    spec_b_.resize(n_cells_);
  }

  const StepStats& last_stats() const { return stats_; }

  /// Advances `prev` by one step; `t_next` only labels divergence errors.
  FieldPair step(const FieldPair& prev, double t_next) {
    const std::size_t n = n_cells_;
    const double dt = cfg_.dt;
    const double omega = cfg_.picard_damping;
    stats_ = StepStats{};

    std::vector<double> u(2 * n);
    std::vector<double> u_prev(2 * n);
    std::copy(prev.a.values().begin(), prev.a.values().end(), u_prev.begin());
    std::copy(prev.b.values().begin(), prev.b.values().end(), u_prev.begin() + n);
    u = u_prev;
    // Linear extrapolation from the previous step when continuing a trajectory.
    if (last_out_.size() == u.size() && std::equal(u.begin(), u.end(), last_out_.begin())) {
      for (std::size_t c = 0; c < 2 * n; ++c) u[c] += last_delta_[c];
    }
    const double mean_a = prev.a.mean();
    const double mean_b = prev.b.mean();

    FieldPair iterate = prev;
    for (int sweep = 1; sweep <= cfg_.newton_max_iter; ++sweep) {
      assemble_mobility(u);
      assemble_hessian(u);
      // Frozen explicit part of the chemical potential: g'(u) - H(u) u.
      for (std::size_t c = 0; c < n; ++c) {
        const EnergyPartials d = dg_partials(u[c], u[n + c], cfg_.params);
        e_[c] = d.dg_da - d.dg_dc - (h_aa_[c] * u[c] + h_ab_[c] * u[n + c]);
        e_[n + c] = d.dg_db - d.dg_dc - (h_ab_[c] * u[c] + h_bb_[c] * u[n + c]);
      }
      apply_b(e_, tmp_);
      for (std::size_t c = 0; c < 2 * n; ++c) rhs_[c] = u_prev[c] - dt * tmp_[c];

      x_ = u;
      try {
        stats_.linear_iterations += solve_linear();
      } catch (const std::runtime_error& err) {
        throw DivergenceError(t_next, err.what());
      }

      // The exact solution conserves each species; remove solver round-off.
      shift_mean(x_.data(), n, mean_a);
      shift_mean(x_.data() + n, n, mean_b);

      for (std::size_t c = 0; c < 2 * n; ++c) {
        u[c] = (1.0 - omega) * u[c] + omega * x_[c];
        if (!std::isfinite(u[c])) throw DivergenceError(t_next, "non-finite value");
      }
      std::copy(u.begin(), u.begin() + n, iterate.a.values().begin());
      std::copy(u.begin() + n, u.end(), iterate.b.values().begin());
      stats_.sweeps = sweep;
      stats_.residual = backward_euler_residual(iterate, prev, dt, kappa_, cfg_.params);
      if (stats_.residual < cfg_.newton_tol) {
        check_bounds(iterate, t_next);
        last_out_ = u;
        last_delta_.resize(u.size());
        for (std::size_t c = 0; c < u.size(); ++c) last_delta_[c] = u[c] - u_prev[c];
        return iterate;
      }
    }
    throw DivergenceError(t_next, "implicit iteration did not converge (residual " +
                                      std::to_string(stats_.residual) + ")");
  }

 private:
  static void shift_mean(double* v, std::size_t n, double target) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += v[c];
    const double shift = target - s / static_cast<double>(n);
    for (std::size_t c = 0; c < n; ++c) v[c] += shift;
  }

  static void check_bounds(const FieldPair& f, double t) {
    for (std::size_t c = 0; c < f.a.size(); ++c) {
      const double a = f.a[c];
      const double b = f.b[c];
      const double cc = 1.0 - a - b;
      if (a < -0.05 || a > 1.05 || b < -0.05 || b > 1.05 || cc < -0.05 || cc > 1.05) {
        throw DivergenceError(t, "composition left [-0.05, 1.05]");
      }
    }
  }

  // Entropic Hessian of g (reduced to a, b) per cell; positive definite. The
  // interaction part of g stays explicit.
  void assemble_hessian(const std::vector<double>& u) {
    const BlendParams& p = cfg_.params;
    const std::size_t n = n_cells_;
    double m_aa = 0.0, m_ab = 0.0, m_ba = 0.0, m_bb = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double a = std::max(u[c], kHessianFloor);
      const double b = std::max(u[n + c], kHessianFloor);
      const double cc = std::max(1.0 - u[c] - u[n + c], kHessianFloor);
      const double hc = 1.0 / (p.n_c * cc);
      h_aa_[c] = 1.0 / (p.n_a * a) + hc;
      h_bb_[c] = 1.0 / (p.n_b * b) + hc;
      h_ab_[c] = hc;
      // Cell mobility times Hessian, averaged for the preconditioner.
      const double ma = mobility_fraction(u[c]), mb = mobility_fraction(u[n + c]);
      const double mc = mobility_fraction(1.0 - u[c] - u[n + c]);
      const double q_aa = ma * mb + ma * mc, q_ab = -ma * mb, q_bb = ma * mb + mb * mc;
      m_aa += q_aa * h_aa_[c] + q_ab * h_ab_[c];
      m_ab += q_aa * h_ab_[c] + q_ab * h_bb_[c];
      m_ba += q_ab * h_aa_[c] + q_bb * h_ab_[c];
      m_bb += q_ab * h_ab_[c] + q_bb * h_bb_[c];
    }
    const double s = mobility_scale_ / static_cast<double>(n);
    q_aa_ = m_aa * s;
    q_ab_ = m_ab * s;
    q_ba_ = m_ba * s;
    q_bb_ = m_bb * s;
  }

  // Face mobility blocks [[ab+ac, -ab], [-ab, ab+bc]] scaled by the reference
  // chain length, plus the domain-mean block used by the preconditioner.
  void assemble_mobility(const std::vector<double>& u) {
    const GridSpec& g = grid_;
    const std::size_t n = n_cells_;
    std::vector<double>& pab = cp_;  // scratch: first n entries
    std::vector<double>& pac = cq_;
    std::vector<double>& pbc = cr_;
    double mean_aa = 0.0, mean_ab = 0.0, mean_bb = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double a = mobility_fraction(u[c]);
      const double b = mobility_fraction(u[n + c]);
      const double cc = mobility_fraction(1.0 - u[c] - u[n + c]);
      pab[c] = a * b;
      pac[c] = a * cc;
      pbc[c] = b * cc;
      mean_aa += pab[c] + pac[c];
      mean_ab -= pab[c];
      mean_bb += pab[c] + pbc[c];
    }
    const double s = mobility_scale_;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.index(i, j);
        const std::size_t e = g.index(detail::wrap_x(i + 1, g.nx), j);
        const double ab = 0.5 * (pab[c] + pab[e]);
        fx_aa_[c] = s * (ab + 0.5 * (pac[c] + pac[e]));
        fx_ab_[c] = -s * ab;
        fx_bb_[c] = s * (ab + 0.5 * (pbc[c] + pbc[e]));
        if (j + 1 < g.ny) {
          const std::size_t nn = g.index(i, j + 1);
          const double abn = 0.5 * (pab[c] + pab[nn]);
          fy_aa_[c] = s * (abn + 0.5 * (pac[c] + pac[nn]));
          fy_ab_[c] = -s * abn;
          fy_bb_[c] = s * (abn + 0.5 * (pbc[c] + pbc[nn]));
        } else {
          fy_aa_[c] = fy_ab_[c] = fy_bb_[c] = 0.0;
        }
      }
    }
    const double inv = s / static_cast<double>(n);
    mbar_aa_ = mean_aa * inv;
    mbar_ab_ = mean_ab * inv;
    mbar_bb_ = mean_bb * inv;
  }

  // out = B v = -div(M grad v), block form over (a, b).
  void apply_b(const std::vector<double>& v, std::vector<double>& out) const {
    const GridSpec& g = grid_;
    const std::size_t n = n_cells_;
    const double idx2 = 1.0 / (g.dx() * g.dx());
    const double idy2 = 1.0 / (g.dy() * g.dy());
    const double* va = v.data();
    const double* vb = v.data() + n;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.index(i, j);
        const std::size_t e = g.index(detail::wrap_x(i + 1, g.nx), j);
        const std::size_t w = g.index(detail::wrap_x(i - 1, g.nx), j);
        const double dae = va[e] - va[c], dbe = vb[e] - vb[c];
        const double daw = va[c] - va[w], dbw = vb[c] - vb[w];
        double oa = (fx_aa_[c] * dae + fx_ab_[c] * dbe - fx_aa_[w] * daw - fx_ab_[w] * dbw) * idx2;
        double ob = (fx_ab_[c] * dae + fx_bb_[c] * dbe - fx_ab_[w] * daw - fx_bb_[w] * dbw) * idx2;
        if (j + 1 < g.ny) {
          const std::size_t nn = c + g.nx;
          const double dan = va[nn] - va[c], dbn = vb[nn] - vb[c];
          oa += (fy_aa_[c] * dan + fy_ab_[c] * dbn) * idy2;
          ob += (fy_ab_[c] * dan + fy_bb_[c] * dbn) * idy2;
        }
        if (j > 0) {
          const std::size_t s = c - g.nx;
          const double das = va[c] - va[s], dbs = vb[c] - vb[s];
          oa -= (fy_aa_[s] * das + fy_ab_[s] * dbs) * idy2;
          ob -= (fy_ab_[s] * das + fy_bb_[s] * dbs) * idy2;
        }
        out[c] = -oa;
        out[n + c] = -ob;
      }
    }
  }

  // out = C v = H v - K lap(v).
  void apply_c(const std::vector<double>& v, std::vector<double>& out) const {
    const GridSpec& g = grid_;
    const std::size_t n = n_cells_;
    const double idx2 = 1.0 / (g.dx() * g.dx());
    const double idy2 = 1.0 / (g.dy() * g.dy());
    const double* va = v.data();
    const double* vb = v.data() + n;
    for (int j = 0; j < g.ny; ++j) {
      const std::size_t rs = static_cast<std::size_t>(detail::mirror_y(j - 1, g.ny)) * g.nx;
      const std::size_t rn = static_cast<std::size_t>(detail::mirror_y(j + 1, g.ny)) * g.nx;
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t c = g.index(i, j);
        const std::size_t e = g.index(detail::wrap_x(i + 1, g.nx), j);
        const std::size_t w = g.index(detail::wrap_x(i - 1, g.nx), j);
        const double la = (va[e] - 2.0 * va[c] + va[w]) * idx2 +
                          (va[rn + i] - 2.0 * va[c] + va[rs + i]) * idy2;
        const double lb = (vb[e] - 2.0 * vb[c] + vb[w]) * idx2 +
                          (vb[rn + i] - 2.0 * vb[c] + vb[rs + i]) * idy2;
        out[c] = h_aa_[c] * va[c] + h_ab_[c] * vb[c] - kappa_.k_a * la - kappa_.k_ab * lb;
        out[n + c] = h_ab_[c] * va[c] + h_bb_[c] * vb[c] - kappa_.k_ab * la - kappa_.k_b * lb;
      }
    }
  }

  // out = P^{-1} r with P = I + dt lam (Qbar + lam Mbar K) per spectral mode:
  // the constant-coefficient counterpart of I + dt B C, Qbar = mean(M H).
  void apply_preconditioner(const std::vector<double>& r, std::vector<double>& out) {
    const std::size_t n = n_cells_;
    spectrum_.forward(r.data(), spec_a_.data());
    spectrum_.forward(r.data() + n, spec_b_.data());
    const std::vector<double>& lam = spectrum_.eigenvalues();
    const double dt = cfg_.dt;
    const double mk_aa = mbar_aa_ * kappa_.k_a + mbar_ab_ * kappa_.k_ab;
    const double mk_ab = mbar_aa_ * kappa_.k_ab + mbar_ab_ * kappa_.k_b;
    const double mk_ba = mbar_ab_ * kappa_.k_a + mbar_bb_ * kappa_.k_ab;
    const double mk_bb = mbar_ab_ * kappa_.k_ab + mbar_bb_ * kappa_.k_b;
    for (std::size_t k = 0; k < n; ++k) {
      const double l = lam[k];
      const double f = dt * l;
      const double p_aa = 1.0 + f * (q_aa_ + l * mk_aa);
      const double p_ab = f * (q_ab_ + l * mk_ab);
      const double p_ba = f * (q_ba_ + l * mk_ba);
      const double p_bb = 1.0 + f * (q_bb_ + l * mk_bb);
      const double det = p_aa * p_bb - p_ab * p_ba;
      const double ra = spec_a_[k];
      const double rb = spec_b_[k];
      spec_a_[k] = (p_bb * ra - p_ab * rb) / det;
      spec_b_[k] = (p_aa * rb - p_ba * ra) / det;
    }
    spectrum_.inverse(spec_a_.data(), out.data());
    spectrum_.inverse(spec_b_.data(), out.data() + n);
  }

  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }

  static double max_norm(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
  }

  void apply_a(const std::vector<double>& v, std::vector<double>& out) {
    apply_c(v, tmp_);
    apply_b(tmp_, out);
    const double dt = cfg_.dt;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k] + dt * out[k];
  }

  // Solves (I + dt B C) x = rhs_ from the guess in x_ with right-preconditioned
  // BiCGStab. The residual must also sit well below the nonlinear tolerance,
  // otherwise the outer iteration stalls on the linear error.
  int solve_linear() {
    const std::size_t n2 = 2 * n_cells_;
    const double target = cfg_.linear_tol * std::max(std::sqrt(dot(rhs_, rhs_)), 1e-300);
    const double target_max = 0.01 * cfg_.newton_tol;
    auto done = [&](const std::vector<double>& res) {
      return std::sqrt(dot(res, res)) <= target && max_norm(res) <= target_max;
    };

    apply_a(x_, q_);
    for (std::size_t k = 0; k < n2; ++k) r_[k] = rhs_[k] - q_[k];
    if (done(r_)) return 0;
    r0_ = r_;
    std::fill(p_.begin(), p_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    const int max_iter = 2000;
    for (int it = 1; it <= max_iter; ++it) {
      const double rho_next = dot(r0_, r_);
      if (rho_next == 0.0) throw std::runtime_error("linear solve: breakdown");
      const double beta = (rho_next / rho) * (alpha / omega);
      rho = rho_next;
      for (std::size_t k = 0; k < n2; ++k) p_[k] = r_[k] + beta * (p_[k] - omega * v_[k]);
      apply_preconditioner(p_, z_);
      apply_a(z_, v_);
      alpha = rho / dot(r0_, v_);
      for (std::size_t k = 0; k < n2; ++k) {
        x_[k] += alpha * z_[k];
        r_[k] -= alpha * v_[k];
      }
      if (done(r_)) return it;
      apply_preconditioner(r_, cr_);
      apply_a(cr_, q_);
      const double tt = dot(q_, q_);
      omega = tt > 0.0 ? dot(q_, r_) / tt : 0.0;
      for (std::size_t k = 0; k < n2; ++k) {
        x_[k] += omega * cr_[k];
        r_[k] -= omega * q_[k];
      }
      if (done(r_)) return it;
      if (omega == 0.0) throw std::runtime_error("linear solve: breakdown");
    }
    return max_iter;
  }

  SimConfig cfg_;
  KappaSet kappa_;
  GridSpec grid_;
  LaplacianSpectrum spectrum_;
  std::size_t n_cells_;
  double mobility_scale_ = 1.0;
  static constexpr double kHessianFloor = 1e-6;
  double q_aa_ = 0.0, q_ab_ = 0.0, q_ba_ = 0.0, q_bb_ = 0.0;
  std::vector<double> h_aa_, h_ab_, h_bb_;
  double mbar_aa_ = 0.0, mbar_ab_ = 0.0, mbar_bb_ = 0.0;
  std::vector<double> fx_aa_, fx_ab_, fx_bb_, fy_aa_, fy_ab_, fy_bb_;
  std::vector<double> x_, r_, r0_, z_, p_, q_, v_, cp_, cr_, cq_, rhs_, e_, tmp_;
  std::vector<double> spec_a_, spec_b_;
  std::vector<double> last_out_, last_delta_;
  StepStats stats_;
};

/// One backward-Euler step from `f`; throws DivergenceError on failure.
inline FieldPair step(const FieldPair& f, const SimConfig& cfg, const KappaSet& k,
                      double t_next = 0.0) {
  ImplicitStepper stepper(cfg, k);
  return stepper.step(f, t_next);
}

// ---------------------------------------------------------------------------
// Gibbs-trace taxonomy

struct ClassifyThresholds {
  double min_drop = 0.01;
  double max_tail_slope = 0.1;
  double usable_fraction = 0.25;
  double tail_fraction = 0.1;
};

/// Relative Gibbs drop and normalised least-squares slope of the trace tail.
struct TraceShape {
  double drop = 0.0;
  double tail_slope = 0.0;
};

inline TraceShape trace_shape(const std::vector<GibbsSample>& trace, double t_end,
                              double tail_fraction = 0.1) {
  if (trace.empty()) throw std::invalid_argument("classify: empty Gibbs trace");
  const double g0 = trace.front().gibbs;
  const double scale = std::max(std::abs(g0), 1e-300);
  TraceShape shape;
  shape.drop = (g0 - trace.back().gibbs) / scale;
  const std::size_t count = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(trace.size()))));
  if (trace.size() < 2) return shape;
  const std::size_t first = trace.size() - std::min(count, trace.size());
  double st = 0.0, sg = 0.0;
  const double m = static_cast<double>(trace.size() - first);
  for (std::size_t k = first; k < trace.size(); ++k) {
    st += trace[k].t;
    sg += trace[k].gibbs;
  }
  st /= m;
  sg /= m;
  double num = 0.0, den = 0.0;
  for (std::size_t k = first; k < trace.size(); ++k) {
    num += (trace[k].t - st) * (trace[k].gibbs - sg);
    den += (trace[k].t - st) * (trace[k].t - st);
  }
  const double slope = den > 0.0 ? num / den : 0.0;
  shape.tail_slope = slope / (scale / t_end);
  return shape;
}

inline StateID classify_state(const std::vector<GibbsSample>& trace, bool completed,
                              std::optional<double> diverged_at, double t_end,
                              const ClassifyThresholds& th = {}) {
  const TraceShape s = trace_shape(trace, t_end, th.tail_fraction);
  const bool dropped = s.drop >= th.min_drop;
  if (completed) {
    if (!dropped) return StateID::State2;
    // Completed runs still falling steeply are usable but not settled.
    return std::abs(s.tail_slope) <= th.max_tail_slope ? StateID::State1 : StateID::State3b;
  }
  const double when = diverged_at.value_or(0.0);
  if (dropped && when >= th.usable_fraction * t_end) return StateID::State3b;
  return StateID::State3a;
}

// ---------------------------------------------------------------------------
// Run driver

inline SimResult run(const SimConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  const KappaSet k = kappa_from_chi(cfg.params);
  ImplicitStepper stepper(cfg, k);
  FieldPair f = initialize(cfg);

  SimResult result;
  result.gibbs_trace.push_back({0, 0.0, gibbs_total(f, k, cfg.params)});
  result.snapshots.push_back({0.0, f});
  const long steps = cfg.step_count();
  long last_snapshot_step = 0;
  long done = 0;
  for (long s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) * cfg.dt;
    try {
      f = stepper.step(f, t);
    } catch (const DivergenceError& err) {
      result.diverged_at = err.time();
      break;
    }
    result.picard_sweeps += stepper.last_stats().sweeps;
    result.linear_iterations += stepper.last_stats().linear_iterations;
    result.gibbs_trace.push_back({s, t, gibbs_total(f, k, cfg.params)});
    done = s;
    if (cfg.snapshot_every > 0 && s % cfg.snapshot_every == 0) {
      result.snapshots.push_back({t, f});
      last_snapshot_step = s;
    }
  }
  if (last_snapshot_step != done) {
    result.snapshots.push_back({static_cast<double>(done) * cfg.dt, f});
  }
  result.state_id =
      classify_state(result.gibbs_trace, result.completed(), result.diverged_at, cfg.t_end);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace ternblend
