#pragma once

#include <cmath>
#include <optional>

#include "fdkp/grid.hpp"
#include "fdkp/norms.hpp"
#include "fdkp/symbols.hpp"
#include "json.hpp"

namespace fdkp {

// Nonlinearity exponent and product evaluation mode shared by all functionals.
struct Discretization {
  int p = 2;
  bool dealias = false;

  void validate() const {
    if (p < 2 || p > 4) throw InvalidArgument("nonlinearity exponent must be 2, 3 or 4");
  }
};

// Sign of the power term: +u^p for even p, -u^p for odd p, so that S < 0 is reachable.
inline double power_sign(int p) { return p % 2 == 0 ? 1.0 : -1.0; }

struct FunctionalValue {
  double value = 0.0;
  double Q = 0.0;
  double S = 0.0;
  double remainder = 0.0;
  double grad_norm = 0.0;
  std::optional<Field> gradient;  // L2 gradient
};

inline void to_json(nlohmann::json& j, const FunctionalValue& f) {
  j = nlohmann::json{{"value", f.value}, {"Q", f.Q}, {"S", f.S}, {"remainder", f.remainder}, {"grad_norm", f.grad_norm}};
}

namespace detail {

inline void require_table_grid(const Field& u, const SymbolTable& t, const char* what) {
  require_same_grid(u.grid(), t.grid, what);
}

// 1/2 <L u, u> + sign/(p+1) int u^(p+1), gradient L u + sign P(u^p).
inline FunctionalValue quadratic_power(const Field& u, const Multiplier& L, const Discretization& disc,
                                       bool with_gradient) {
  disc.validate();
  const Spectrum uh = forward_transform(u);
  require_zero_xmean(uh, "functional");
  const double sigma = power_sign(disc.p);
  FunctionalValue fv;
  fv.Q = 0.5 * weighted_energy(uh, L);
  if (with_gradient) {
    Spectrum pw = power_spectrum(u, disc.p, disc.dealias);
    fv.S = sigma / (disc.p + 1) * inner_l2(pw, uh);
    Spectrum g = L * uh;
    g.axpy(sigma, pw);
    g = project_zero_xmean(std::move(g));
    fv.grad_norm = std::sqrt(inner_l2(g, g));
    fv.gradient = Field::from_spectrum(std::move(g));
  } else {
    fv.S = sigma / (disc.p + 1) * power_integral(u, disc.p, disc.dealias);
  }
  fv.value = fv.Q + fv.S;
  return fv;
}

}  // namespace detail

// Linear symbol eps^2 + n(k) of the speed-(1 - eps^2) FDKP operator.
inline Multiplier fdkp_operator(const SymbolTable& t, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  Multiplier L(t.n.size(), 0.0);
  const Grid2D& g = t.grid;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 1; i < g.nkx(); ++i) {
      const std::size_t q = g.spectral_index(i, j);
      L[q] = eps * eps + t.n[q];
    }
  return L;
}

inline FunctionalValue energy_fdkp(const Field& u, const SymbolTable& t, const Discretization& disc = {},
                                   bool with_gradient = false) {
  detail::require_table_grid(u, t, "energy_fdkp");
  return detail::quadratic_power(u, t.m, disc, with_gradient);
}

inline double momentum(const Field& u) {
  double s = 0.0;
  for (double v : u.values()) s += v * v;
  return 0.5 * s * u.grid().cell_area();
}

inline FunctionalValue i_eps(const Field& u, double eps, const SymbolTable& t, const Discretization& disc = {},
                             bool with_gradient = false) {
  detail::require_table_grid(u, t, "i_eps");
  return detail::quadratic_power(u, fdkp_operator(t, eps), disc, with_gradient);
}

inline FunctionalValue t0(const Field& zeta, const SymbolTable& t, const Discretization& disc = {},
                          bool with_gradient = false) {
  detail::require_table_grid(zeta, t, "t0");
  return detail::quadratic_power(zeta, t.mtilde, disc, with_gradient);
}

struct Residual {
  Field field;
  double l2 = 0.0;
  double l2_relative = 0.0;  // against |L u|_L2
  double ytilde = 0.0;       // primal weighted norm
  double ytilde_dual = 0.0;  // sup over unit Ytilde directions
  double ytilde_relative = 0.0;  // ytilde_dual / |u|_Ytilde
  double z = 0.0;
  double z_relative = 0.0;  // against |L u|_Z
};

namespace detail {

inline Residual make_residual(const Field& u, const Multiplier& L, const Discretization& disc, double beta, double s) {
  disc.validate();
  const Spectrum uh = forward_transform(u);
  require_zero_xmean(uh, "residual");
  const Spectrum lu = L * uh;
  Spectrum r = lu;
  r.axpy(power_sign(disc.p), power_spectrum(u, disc.p, disc.dealias));
  r = project_zero_xmean(std::move(r));
  const NormKind yt = NormKind::ytilde(beta, true);
  const NormKind zk = NormKind::z(s);
  auto ratio = [](double a, double b) { return b > 0.0 ? a / b : (a > 0.0 ? INFINITY : 0.0); };
  Residual res{Field(u.grid())};
  res.l2 = std::sqrt(inner_l2(r, r));
  res.l2_relative = ratio(res.l2, std::sqrt(inner_l2(lu, lu)));
  res.ytilde = norm(r, yt);
  res.ytilde_dual = dual_norm(r, yt);
  res.ytilde_relative = ratio(res.ytilde_dual, norm(uh, yt));
  res.z = norm(r, zk);
  res.z_relative = ratio(res.z, norm(lu, zk));
  res.field = Field::from_spectrum(std::move(r));
  return res;
}

}  // namespace detail

// mtilde(D) zeta + P(zeta^2).
inline Residual residual_steady_kp(const Field& zeta, const SymbolTable& t, const Discretization& disc = {},
                                   double s = 2.0) {
  detail::require_table_grid(zeta, t, "residual_steady_kp");
  return detail::make_residual(zeta, t.mtilde, disc, t.beta, s);
}

// eps^2 u + n(D) u + P(u^2).
inline Residual residual_steady_fdkp(const Field& u, double eps, const SymbolTable& t, const Discretization& disc = {},
                                     double s = 2.0) {
  detail::require_table_grid(u, t, "residual_steady_fdkp");
  return detail::make_residual(u, fdkp_operator(t, eps), disc, t.beta, s);
}

}  // namespace fdkp
