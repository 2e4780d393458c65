#pragma once

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdkp/functionals.hpp"
#include "fdkp/grid.hpp"
#include "fdkp/norms.hpp"
#include "fdkp/symbols.hpp"

namespace fdkp {

struct PicardStep {
  int step = 0;
  double delta_x = 0.0;  // |u2_k - u2_{k-1}|_X
  double ratio = 0.0;    // delta_k / delta_{k-1}, 0 on the first step
};

struct PicardOptions {
  double tol = 1e-12;
  int max_iter = 200;
  Discretization disc;
  double s = 2.0;
  bool include_beta_weight = true;
  std::optional<Field> warm_start;  // initial u2; zero when empty
};

struct ReductionState {
  Field u1;
  Field u2;
  double eps = 0.0;
  std::vector<PicardStep> log;
  bool converged = false;
  double contraction = 0.0;  // largest ratio above the round-off floor
  double u1_eps_norm = 0.0;
  bool in_unit_ball = true;  // |u1|_eps <= 1
  double u2_x_norm = 0.0;
  double sigma = 0.0;  // |u2|_X / (eps |u1|_eps^2)
  double fixed_point_defect = 0.0;
  double system_residual_z = 0.0;
};

namespace detail {

inline double support_leak(const Spectrum& s, const Multiplier& keep) {
  const Grid2D& g = s.grid();
  double out = 0.0, total = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nkx(); ++i) {
      const std::size_t q = g.spectral_index(i, j);
      const double e = g.multiplicity(i) * std::norm(s.data()[q]);
      total += e;
      if (keep[q] == 0.0) out += e;
    }
  return total > 0.0 ? std::sqrt(out / total) : 0.0;
}

inline constexpr double kSupportTolerance = 1e-10;

inline Spectrum require_support(Spectrum s, const Multiplier& keep, const char* what) {
  const double leak = support_leak(s, keep);
  if (leak > kSupportTolerance)
    throw InvalidArgument(std::string(what) + ": field leaves its declared spectral support (relative " +
                          std::to_string(leak) + ")");
  s *= keep;
  return s;
}

inline Multiplier off_cone_mask(const SymbolTable& t) {
  Multiplier m(t.chi.size(), 0.0);
  for (std::size_t q = 0; q < m.size(); ++q) m[q] = t.inv_n_offcone[q] > 0.0 ? 1.0 : 0.0;
  return m;
}

// Spectrum of G(u1, u2) given both in physical and coefficient form.
inline Spectrum g_spectrum(const Field& u1, const Spectrum& u2h, const Field& u2, double eps, const SymbolTable& t,
                           const Discretization& disc) {
  Field u = u1 + u2;
  Spectrum g = power_spectrum(u, disc.p, disc.dealias);
  g *= power_sign(disc.p);
  g.axpy(eps * eps, u2h);
  g *= t.inv_n_offcone;
  g *= -1.0;
  return g;
}

}  // namespace detail

// G(u1, u2) = -n^{-1} (1 - chi) (eps^2 u2 + (u1 + u2)^2).
inline Field g_map(const Field& u1, const Field& u2, double eps, const SymbolTable& t, const Discretization& disc = {}) {
  require_same_grid(u1.grid(), t.grid, "g_map");
  require_same_grid(u2.grid(), t.grid, "g_map");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("g_map: eps must lie in (0, 1)");
  const Spectrum u1h = detail::require_support(forward_transform(u1), t.chi, "g_map u1");
  const Spectrum u2h = detail::require_support(forward_transform(u2), detail::off_cone_mask(t), "g_map u2");
  return Field::from_spectrum(detail::g_spectrum(Field::from_spectrum(u1h), u2h, Field::from_spectrum(u2h), eps, t, disc));
}

// Picard iteration u2 <- G(u1, u2) from u2 = 0 (or a warm start).
inline ReductionState solve_u2(const Field& u1_in, double eps, const SymbolTable& t, const PicardOptions& opt) {
  require_same_grid(u1_in.grid(), t.grid, "solve_u2");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("solve_u2: eps must lie in (0, 1)");
  if (!(opt.tol > 0.0) || opt.max_iter < 1) throw InvalidArgument("solve_u2: tol and max_iter must be positive");
  opt.disc.validate();
  const Grid2D& g = t.grid;
  const NormKind xk = NormKind::x(opt.s);
  const Multiplier wx = norm_weights(g, xk);
  const Multiplier off = detail::off_cone_mask(t);

  Spectrum u1h = detail::require_support(forward_transform(u1_in), t.chi, "solve_u2 u1");
  Field u1 = Field::from_spectrum(u1h);
  Spectrum u2h(g);
  if (opt.warm_start) u2h = detail::require_support(forward_transform(*opt.warm_start), off, "solve_u2 warm start");
  Field u2 = Field::from_spectrum(u2h);

  ReductionState st{u1, u2, eps, {}};
  st.u1_eps_norm = std::sqrt(weighted_energy(u1h, norm_weights(g, NormKind::epsilon(eps, t.beta, opt.include_beta_weight))));
  st.in_unit_ball = st.u1_eps_norm <= 1.0;

  double prev = 0.0;
  int bad = 0;
  for (int k = 1; k <= opt.max_iter; ++k) {
    Spectrum next = detail::g_spectrum(u1, u2h, u2, eps, t, opt.disc);
    Spectrum diff = next - u2h;
    const double d = std::sqrt(weighted_energy(diff, wx));
    const double ratio = k > 1 && prev > 0.0 ? d / prev : 0.0;
    st.log.push_back({k, d, ratio});
    u2h = std::move(next);
    u2 = Field::from_spectrum(u2h);
    const double size = std::sqrt(weighted_energy(u2h, wx));
    const bool above_floor = prev > 1e3 * DBL_EPSILON * size;
    if (k > 1 && above_floor) st.contraction = std::max(st.contraction, ratio);
    if (d <= opt.tol) {
      st.converged = true;
      break;
    }
    bad = (k > 1 && above_floor && ratio >= 1.0) ? bad + 1 : 0;
    if (bad >= 3) {
      std::ostringstream os;
      os << "Picard map not contracting at eps=" << eps << ", delta=" << t.delta << " (ratio " << ratio << ")";
      throw SolverError(SolverFailure::diverged, os.str());
    }
    prev = d;
  }
  if (!st.converged) {
    std::ostringstream os;
    os << "Picard iteration hit max_iter=" << opt.max_iter << " at eps=" << eps << ", last step " << st.log.back().delta_x;
    throw SolverError(SolverFailure::not_converged, os.str());
  }
  st.u2 = u2;
  st.u2_x_norm = std::sqrt(weighted_energy(u2h, wx));
  st.sigma = st.u1_eps_norm > 0.0 ? st.u2_x_norm / (eps * st.u1_eps_norm * st.u1_eps_norm) : 0.0;
  const Spectrum check = detail::g_spectrum(u1, u2h, u2, eps, t, opt.disc) - u2h;
  st.fixed_point_defect = std::sqrt(weighted_energy(check, wx));
  // eps^2 u2 + n u2 + (1 - chi) u^p
  Spectrum r = power_spectrum(u1 + u2, opt.disc.p, opt.disc.dealias);
  r *= power_sign(opt.disc.p);
  r *= off;
  Multiplier lin(off.size(), 0.0);
  for (std::size_t q = 0; q < lin.size(); ++q) lin[q] = off[q] * (eps * eps + t.n[q]);
  r.axpy(1.0, lin * u2h);
  st.system_residual_z = norm(r, NormKind::z(opt.s));
  return st;
}

inline ReductionState solve_u2(const Field& u1, double eps, const SymbolTable& t, double tol, int max_iter) {
  PicardOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return solve_u2(u1, eps, t, o);
}

struct JEpsResult {
  FunctionalValue value;  // Q, S: u1-only parts; remainder: the rest
  ReductionState state;
  double orthogonality = 0.0;  // |<u1, u2>| / (|u1| |u2|)
};

inline JEpsResult j_eps(const Field& u1, double eps, const SymbolTable& t, const PicardOptions& opt = {},
                        bool with_gradient = false) {
  ReductionState st = solve_u2(u1, eps, t, opt);
  const Spectrum a = forward_transform(st.u1), b = forward_transform(st.u2);
  const double na = std::sqrt(inner_l2(a, a)), nb = std::sqrt(inner_l2(b, b));
  const double orth = na > 0.0 && nb > 0.0 ? std::abs(inner_l2(a, b)) / (na * nb) : 0.0;
  Field u = Field::from_spectrum(a + b);
  FunctionalValue full = i_eps(u, eps, t, opt.disc, with_gradient);
  const FunctionalValue part = i_eps(st.u1, eps, t, opt.disc, false);
  FunctionalValue out;
  out.value = full.value;
  out.Q = part.Q;
  out.S = part.S;
  out.remainder = full.value - part.Q - part.S;
  if (with_gradient) {
    // the off-cone part of the gradient vanishes at u2(u1); keep the cone part
    Spectrum gh = forward_transform(*full.gradient);
    gh *= t.chi;
    out.grad_norm = std::sqrt(inner_l2(gh, gh));
    out.gradient = Field::from_spectrum(std::move(gh));
  }
  return {out, std::move(st), orth};
}

inline Field change_vars_i1(const Field& u1, const SymbolTable& t, bool inverse) {
  require_same_grid(u1.grid(), t.grid, "change_vars_i1");
  Spectrum s = detail::require_support(forward_transform(u1), t.chi, "change_vars_i1");
  s *= inverse ? t.inv_ratio : t.ratio;
  return Field::from_spectrum(std::move(s));
}

// Lattice of the KP variable zeta for an FDKP grid at speed parameter eps, and back.
inline Grid2D kp_grid(const Grid2D& fdkp, double eps) { return fdkp.with_lengths(eps * fdkp.lx(), eps * eps * fdkp.ly()); }
inline Grid2D fdkp_grid(const Grid2D& kp, double eps) { return kp.with_lengths(kp.lx() / eps, kp.ly() / (eps * eps)); }

// zeta(X, Y) = eps^{-2} u(X / eps, Y / eps^2): same samples, relabeled lattice.
inline Field change_vars_i2(const Field& u_tilde, double eps, const SymbolTable* cone = nullptr) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("change_vars_i2: eps must lie in (0, 1)");
  const Grid2D target = kp_grid(u_tilde.grid(), eps);
  Spectrum s = forward_transform(u_tilde);
  if (cone) {
    require_same_grid(u_tilde.grid(), cone->grid, "change_vars_i2");
    s = detail::require_support(std::move(s), cone->chi, "change_vars_i2");
  }
  std::vector<double> v(u_tilde.values());
  for (auto& x : v) x /= eps * eps;
  Spectrum z(target, std::move(s.data()));
  z *= 1.0 / std::sqrt(eps);
  return Field::from_parts(std::move(v), std::move(z));
}

inline Field change_vars_i2_inverse(const Field& zeta, double eps, const Grid2D* target = nullptr) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("change_vars_i2: eps must lie in (0, 1)");
  const Grid2D fine = fdkp_grid(zeta.grid(), eps);
  if (target && *target != fine)
    throw InvalidArgument("change_vars_i2: lattice " + zeta.grid().describe() + " does not map onto " + target->describe() +
                          " at eps=" + std::to_string(eps));
  Spectrum s = forward_transform(zeta);
  std::vector<double> v(zeta.values());
  for (auto& x : v) x *= eps * eps;
  Spectrum u(fine, std::move(s.data()));
  u *= std::sqrt(eps);
  return Field::from_parts(std::move(v), std::move(u));
}

struct TEpsOptions {
  PicardOptions picard;
  double ball_radius = 30.0;
};

struct TEpsResult {
  FunctionalValue value;  // Q(zeta), S(zeta), remainder eps^{1/2} R
  ReductionState state;
  Field u;                 // u1 + u2 on the FDKP grid
  FunctionalValue scaled;  // eps^{-3} I_eps(u) with its own quadratic / power split
  double ytilde_norm = 0.0;
  double steady_residual = 0.0;  // dual Ytilde norm of grad I_eps(u) over |u|_Ytilde, with the gradient
};

// Projection of a KP-grid field onto the scaled cone chi(eps K1, eps^2 K2).
inline Field project_scaled_cone(const Field& zeta, const SymbolTable& t) {
  require_same_grid(zeta.grid(), kp_grid(t.grid, t.eps), "project_scaled_cone");
  Spectrum s = forward_transform(zeta);
  s *= t.chi;  // the lattices share indices, so chi on the FDKP grid is chi_eps on the KP grid
  return Field::from_spectrum(std::move(s));
}

// T_eps(zeta) = eps^{-3} I_eps(u1 + u2(u1)), u1 = (ntilde/n)^{1/2} chi I2^{-1} zeta. The table lives on
// the FDKP grid and its eps is the one used.
inline TEpsResult t_eps(const Field& zeta, const SymbolTable& t, const TEpsOptions& opt = {}, bool with_gradient = false) {
  const double eps = t.eps;
  const Grid2D zg = kp_grid(t.grid, eps);
  require_same_grid(zeta.grid(), zg, "t_eps");
  const Discretization& disc = opt.picard.disc;
  const Spectrum zh = detail::require_support(forward_transform(zeta), t.chi, "t_eps");
  require_zero_xmean(zh, "t_eps");
  const Multiplier wy = norm_weights(zg, NormKind::ytilde(t.beta, true));
  const double ynorm = std::sqrt(weighted_energy(zh, wy));
  if (ynorm >= opt.ball_radius) {
    std::ostringstream os;
    os << "|zeta|_Ytilde = " << ynorm << " outside the ball of radius " << opt.ball_radius;
    throw SolverError(SolverFailure::ball_violation, os.str());
  }
  Spectrum u1h(t.grid, zh.data());
  u1h *= std::sqrt(eps);
  u1h *= t.inv_ratio;
  ReductionState st = solve_u2(Field::from_spectrum(u1h), eps, t, opt.picard);
  const Spectrum u2h = forward_transform(st.u2);
  Field u = Field::from_spectrum(u1h + u2h);
  const FunctionalValue iv = i_eps(u, eps, t, disc, with_gradient);
  const double e3 = 1.0 / (eps * eps * eps);

  TEpsResult r{FunctionalValue{}, std::move(st), u, FunctionalValue{}, ynorm};
  r.scaled.value = e3 * iv.value;
  r.scaled.Q = e3 * iv.Q;
  r.scaled.S = e3 * iv.S;
  r.value.value = r.scaled.value;
  r.value.Q = 0.5 * ynorm * ynorm;
  r.value.S = power_sign(disc.p) / (disc.p + 1) * power_integral(Field::from_spectrum(zh), disc.p, disc.dealias);
  r.value.remainder = r.value.value - r.value.Q - r.value.S;
  if (with_gradient) {
    Spectrum gh = forward_transform(*iv.gradient);
    r.scaled.grad_norm = e3 * std::sqrt(inner_l2(gh, gh));
    const NormKind yt = NormKind::ytilde(t.beta, true);
    const double un = norm(u, yt);
    r.steady_residual = un > 0.0 ? dual_norm(gh, yt) / un : 0.0;
    gh *= t.inv_ratio;
    gh *= std::pow(eps, -2.5);
    Spectrum gz(zg, std::move(gh.data()));
    r.value.grad_norm = std::sqrt(inner_l2(gz, gz));
    r.value.gradient = Field::from_spectrum(std::move(gz));
  }
  return r;
}

}  // namespace fdkp
