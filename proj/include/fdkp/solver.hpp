#pragma once

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "fdkp/diagnostics.hpp"
#include "fdkp/functionals.hpp"
#include "fdkp/lump.hpp"
#include "fdkp/reduction.hpp"
#include "json.hpp"

namespace fdkp {

enum class Method { nehari_pg, petviashvili };
enum class Target { kp0, fdkp_direct, fdkp_reduced };
enum class InitialGuess { lump, gaussian, file };

inline const char* to_string(Method m) { return m == Method::nehari_pg ? "nehari_pg" : "petviashvili"; }
inline const char* to_string(Target t) {
  switch (t) {
    case Target::kp0: return "kp0";
    case Target::fdkp_direct: return "fdkp_direct";
    case Target::fdkp_reduced: return "fdkp_reduced";
  }
  return "?";
}
inline const char* to_string(InitialGuess g) {
  switch (g) {
    case InitialGuess::lump: return "lump";
    case InitialGuess::gaussian: return "gaussian";
    case InitialGuess::file: return "file";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "nehari_pg") return Method::nehari_pg;
  if (s == "petviashvili") return Method::petviashvili;
  throw InvalidArgument("unknown method '" + s + "' (nehari_pg, petviashvili)");
}
inline Target parse_target(const std::string& s) {
  if (s == "kp0") return Target::kp0;
  if (s == "fdkp_direct") return Target::fdkp_direct;
  if (s == "fdkp_reduced") return Target::fdkp_reduced;
  throw InvalidArgument("unknown target '" + s + "' (kp0, fdkp_direct, fdkp_reduced)");
}
inline InitialGuess parse_initial_guess(const std::string& s) {
  if (s == "lump") return InitialGuess::lump;
  if (s == "gaussian") return InitialGuess::gaussian;
  if (s == "file") return InitialGuess::file;
  throw InvalidArgument("unknown initial_guess '" + s + "' (lump, gaussian, file)");
}

struct SolverConfig {
  Method method = Method::nehari_pg;
  Target target = Target::kp0;
  double eps = 0.1;
  double beta = 7.0 / 3.0;
  double delta = 0.3;
  int p = 2;
  double tau = 1.0;
  double grad_tol = 1e-10;
  double residual_tol = 1e-10;
  int max_iter = 3000;
  std::uint64_t seed = 0;
  InitialGuess initial_guess = InitialGuess::lump;
  bool dealias = false;
  bool preconditioned = true;  // false: plain L2 descent
  double ball_radius = 30.0;
  double picard_tol = 1e-13;
  int picard_max_iter = 200;
  int stall_window = 50;
  int nonvanishing_every = 10;
  double sobolev_s = 2.0;           // X norm used by the Picard solve
  bool include_beta_weight = true;  // eps-norm carries the (beta - 1/3)/2 k1^2 term

  bool kp() const { return target == Target::kp0; }
  Discretization disc() const { return {p, dealias}; }

  void validate() const {
    if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
    if (p < 2 || p > 4) throw InvalidArgument("p must be an integer in [2, 5)");
    if (!(grad_tol > 0.0) || !(residual_tol > 0.0) || !(picard_tol > 0.0))
      throw InvalidArgument("tolerances must be positive");
    if (max_iter < 1 || picard_max_iter < 1) throw InvalidArgument("iteration limits must be positive");
    if (!(beta > 1.0 / 3.0)) throw InvalidArgument("beta must exceed 1/3");
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
    if (!(ball_radius > 0.0)) throw InvalidArgument("ball_radius must be positive");
    if (stall_window < 1) throw InvalidArgument("stall_window must be positive");
    if (!(sobolev_s > 1.0)) throw InvalidArgument("sobolev_s must exceed 1");
    if (method == Method::petviashvili && target == Target::fdkp_reduced)
      throw InvalidArgument("petviashvili has no fdkp_reduced form; use nehari_pg");
  }
};

// One evaluation of the target functional in its own (T) scale.
struct Evaluation {
  FunctionalValue f;              // gradient lives on the unknown's grid
  double residual = 0.0;          // steady residual of the physical field, relative dual Ytilde
  std::optional<TEpsResult> reduced;
};

// The functional being minimized, its preconditioner and constraint. The unknown lives on
// the KP grid for kp0 and fdkp_reduced, on the FDKP grid for fdkp_direct.
class Problem {
 public:
  // kp_grid: the box of the KP variable; the FDKP box is derived from it.
  Problem(const SolverConfig& cfg, const Grid2D& kp)
      : cfg_(cfg),
        grid_(cfg.target == Target::fdkp_direct ? fdkp_grid(kp, cfg.eps) : kp),
        table_(build_table(cfg.kp() ? kp : fdkp_grid(kp, cfg.eps), cfg.beta, cfg.delta, cfg.eps)) {
    cfg.validate();
    const NormKind yt = NormKind::ytilde(cfg.beta, true);
    switch (cfg.target) {
      case Target::kp0:
        op_ = table_.mtilde;
        break;
      case Target::fdkp_direct:
        op_ = fdkp_operator(table_, cfg.eps);
        break;
      case Target::fdkp_reduced:
        op_ = norm_weights(grid_, yt);
        for (std::size_t q = 0; q < op_.size(); ++q) op_[q] *= table_.chi[q] > 0.0 ? 1.0 : 0.0;
        break;
    }
    scale_ = cfg.target == Target::fdkp_direct ? 1.0 / (cfg.eps * cfg.eps * cfg.eps) : 1.0;
    precond_.assign(op_.size(), 0.0);
    for (std::size_t q = 0; q < op_.size(); ++q)
      if (op_[q] > 0.0) precond_[q] = cfg.preconditioned ? scale_ * op_[q] : 1.0;
    yt_weights_ = norm_weights(grid_, yt);
  }

  const SolverConfig& config() const { return cfg_; }
  const Grid2D& grid() const { return grid_; }
  const SymbolTable& table() const { return table_; }
  Target target() const { return cfg_.target; }
  bool has_remainder() const { return cfg_.target == Target::fdkp_reduced; }
  // Positive symbol of the linear part (unscaled); zero on excluded modes.
  const Multiplier& linear_operator() const { return op_; }
  const Multiplier& preconditioner() const { return precond_; }

  Field constrain(const Field& z) const {
    require_same_grid(z.grid(), grid_, "constrain");
    Spectrum s = forward_transform(z);
    if (has_remainder())
      s *= table_.chi;
    else
      s = project_zero_xmean(std::move(s));
    return Field::from_spectrum(std::move(s));
  }

  Evaluation evaluate(const Field& z, bool with_gradient) const {
    Evaluation e;
    const Discretization disc = cfg_.disc();
    switch (cfg_.target) {
      case Target::kp0: {
        e.f = t0(z, table_, disc, with_gradient);
        if (with_gradient) e.residual = relative_dual(*e.f.gradient, z);
        break;
      }
      case Target::fdkp_direct: {
        FunctionalValue iv = i_eps(z, cfg_.eps, table_, disc, with_gradient);
        if (with_gradient) e.residual = relative_dual(*iv.gradient, z);
        e.f.value = scale_ * iv.value;
        e.f.Q = scale_ * iv.Q;
        e.f.S = scale_ * iv.S;
        if (with_gradient) {
          Field g = *iv.gradient;
          g *= scale_;
          e.f.grad_norm = scale_ * iv.grad_norm;
          e.f.gradient = std::move(g);
        }
        break;
      }
      case Target::fdkp_reduced: {
        TEpsOptions o;
        o.picard.tol = cfg_.picard_tol;
        o.picard.max_iter = cfg_.picard_max_iter;
        o.picard.disc = disc;
        o.picard.s = cfg_.sobolev_s;
        o.picard.include_beta_weight = cfg_.include_beta_weight;
        const double zn = std::sqrt(inner_l2(z, z));
        if (warm_ && warm_norm_ > 0.0) {
          // u2 is homogeneous of degree p in u1 to leading order
          Field w = *warm_;
          w *= std::pow(zn / warm_norm_, cfg_.p);
          o.picard.warm_start = std::move(w);
        }
        o.ball_radius = cfg_.ball_radius;
        TEpsResult r = t_eps(z, table_, o, with_gradient);
        warm_ = r.state.u2;
        warm_norm_ = zn;
        e.f = r.value;
        e.residual = r.steady_residual;
        e.reduced = std::move(r);
        break;
      }
    }
    return e;
  }

  void reset_warm_start() const {
    warm_.reset();
    warm_norm_ = 0.0;
  }

  // Quadratic and power parts of T on the ray through z, without the remainder.
  std::pair<double, double> ray_parts(const Field& z) const {
    if (!has_remainder()) {
      const FunctionalValue f = evaluate(z, false).f;
      return {f.Q, f.S};
    }
    const Spectrum zh = forward_transform(z);
    const int p = cfg_.p;
    return {0.5 * weighted_energy(zh, op_), power_sign(p) / (p + 1) * power_integral(z, p, cfg_.dealias)};
  }

  // Last ratio of the ray root to its closed-form seed, used to start the next search.
  double& root_ratio() const { return root_ratio_; }

  // The FDKP-scale field u for FDKP targets, zeta itself for kp0.
  Field physical(const Field& z, const Evaluation* e = nullptr) const {
    if (cfg_.target != Target::fdkp_reduced) return z;
    if (e && e->reduced) return e->reduced->u;
    TEpsOptions o;
    o.picard.tol = cfg_.picard_tol;
    o.picard.max_iter = cfg_.picard_max_iter;
    o.picard.disc = cfg_.disc();
    o.picard.s = cfg_.sobolev_s;
    o.picard.include_beta_weight = cfg_.include_beta_weight;
    o.ball_radius = cfg_.ball_radius;
    return t_eps(z, table_, o).u;
  }

  // The KP-variable picture of a field on the unknown's grid.
  Field kp_picture(const Field& z) const {
    return cfg_.target == Target::fdkp_direct ? change_vars_i2(z, cfg_.eps) : z;
  }

  // Primal norm |z|_P = sqrt(sum P |c|^2), and the matching dual norm of a gradient.
  double primal_norm(const Spectrum& s) const { return std::sqrt(weighted_energy(s, precond_)); }
  double dual_norm_of(const Spectrum& g) const {
    const Grid2D& gr = g.grid();
    double s = 0.0;
    for (std::size_t j = 0; j < gr.ny(); ++j)
      for (std::size_t i = 0; i < gr.nkx(); ++i) {
        const std::size_t q = gr.spectral_index(i, j);
        if (precond_[q] > 0.0) s += gr.multiplicity(i) * std::norm(g.data()[q]) / precond_[q];
      }
    return std::sqrt(s);
  }
  Spectrum apply_inverse_preconditioner(Spectrum g) const {
    for (std::size_t q = 0; q < g.data().size(); ++q) g.data()[q] = precond_[q] > 0.0 ? g.data()[q] / precond_[q] : 0.0;
    return g;
  }

 private:
  double relative_dual(const Field& grad, const Field& u) const {
    const Spectrum gh = forward_transform(grad), uh = forward_transform(u);
    double d = 0.0;
    const Grid2D& g = gh.grid();
    for (std::size_t j = 0; j < g.ny(); ++j)
      for (std::size_t i = 0; i < g.nkx(); ++i) {
        const std::size_t q = g.spectral_index(i, j);
        if (yt_weights_[q] > 0.0) d += g.multiplicity(i) * std::norm(gh.data()[q]) / yt_weights_[q];
      }
    const double un = std::sqrt(weighted_energy(uh, yt_weights_));
    return un > 0.0 ? std::sqrt(d) / un : 0.0;
  }

  SolverConfig cfg_;
  Grid2D grid_;
  SymbolTable table_;
  Multiplier op_, precond_, yt_weights_;
  double scale_ = 1.0;
  mutable std::optional<Field> warm_;
  mutable double warm_norm_ = 0.0;
  mutable double root_ratio_ = 1.0;
};

// Ray scaling onto the constraint set for T = Q + S with S homogeneous of degree p + 1.
inline double nehari_lambda(double Q, double S, int p) {
  if (!(S < 0.0)) throw SolverError(SolverFailure::not_projectable, "S = " + std::to_string(S) + " is not negative");
  if (!(Q > 0.0)) throw SolverError(SolverFailure::not_projectable, "Q = " + std::to_string(Q) + " is not positive");
  const double r = -2.0 * Q / ((p + 1) * S);
  return p == 2 ? r : std::pow(r, 1.0 / (p - 1));
}

struct Projection {
  explicit Projection(const Grid2D& g) : field(g) {}
  double lambda = 1.0;
  Field field;
  Evaluation eval;           // at the projected field, with gradient
  double ray_derivative = 0.0;  // d/dl T(l z') at l = 1 for the projected z'
  int evaluations = 0;
};

namespace detail {

inline double ray_derivative(const Evaluation& e, const Field& z) { return inner_l2(*e.f.gradient, z); }

}  // namespace detail

inline Projection nehari_project(const Field& z, const Problem& prob) {
  const auto [Q, S] = prob.ray_parts(z);
  const int p = prob.config().p;
  Projection out(z.grid());
  out.evaluations = 1;
  if (!(S < 0.0)) throw SolverError(SolverFailure::not_projectable, "S = " + std::to_string(S) + " >= 0 on this ray");
  const double seed = nehari_lambda(Q, S, p);
  if (!prob.has_remainder()) {
    out.lambda = seed;
    out.field = seed * z;
    out.eval = prob.evaluate(out.field, true);
    out.ray_derivative = detail::ray_derivative(out.eval, out.field);
    out.evaluations = 2;
    return out;
  }

  // phi(l) = d/dl T(l z) = <grad T(l z), z>. Start from the seed corrected by the last root
  // ratio, take one step with the derivative of the remainder-free part, then secant steps;
  // fall back to a bracketed solve on [seed/4, 4 seed].
  std::optional<Evaluation> at;
  double at_lambda = 0.0;
  auto phi = [&](double l) {
    Evaluation e = prob.evaluate(l * z, true);
    ++out.evaluations;
    const double v = detail::ray_derivative(e, z);
    at = std::move(e);
    at_lambda = l;
    return v;
  };
  const double lo = seed / 4.0, hi = 4.0 * seed;
  auto done = [&](double l, double v) { return std::abs(l * v) <= 1e-12 * std::abs(at->f.value); };
  auto inside = [&](double l) { return l > lo && l < hi; };

  double la = seed * prob.root_ratio();
  if (!inside(la)) la = seed;
  double fa = phi(la);
  bool found = done(la, fa);
  if (!found) {
    const double slope = 2.0 * Q + (p + 1) * p * std::pow(la, p - 1) * S;
    double lb = la - fa / slope;
    if (!inside(lb)) lb = seed;
    double fb = phi(lb);
    found = done(lb, fb);
    for (int it = 0; it < 30 && !found; ++it) {
      if (fb == fa) break;
      const double lc = lb - fb * (lb - la) / (fb - fa);
      if (!inside(lc)) break;
      la = lb;
      fa = fb;
      lb = lc;
      fb = phi(lb);
      found = done(lb, fb);
    }
  }
  if (!found) {
    double flo, fhi;
    try {
      flo = phi(lo);
      fhi = phi(hi);
    } catch (const SolverError& err) {
      throw SolverError(SolverFailure::geometry_violation,
                        std::string("ray bracket could not be evaluated (") + err.what() + "); eps may be too large");
    }
    if (!(flo > 0.0 && fhi < 0.0)) {
      std::ostringstream os;
      os << "no root of d/dl T(l z) in [" << lo << ", " << hi << "] (signs " << flo << ", " << fhi
         << "); eps may be too large";
      throw SolverError(SolverFailure::geometry_violation, os.str());
    }
    std::uintmax_t iters = 60;
    const auto r = boost::math::tools::toms748_solve(phi, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(50), iters);
    phi(0.5 * (r.first + r.second));
  }
  prob.root_ratio() = at_lambda / seed;
  out.lambda = at_lambda;
  out.field = at_lambda * z;
  // the gradient at l z serves the rescaled field unchanged
  out.eval = std::move(*at);
  out.ray_derivative = detail::ray_derivative(out.eval, out.field);
  return out;
}

struct HistoryRow {
  int iter = 0;
  double T = 0.0, Q = 0.0, S = 0.0, lambda = 1.0, grad_norm = 0.0, residual = 0.0, nonvanishing = 0.0;
};

struct Certificates {
  double nehari_defect = 0.0;        // |dT[z](z)| / max(1, |T|)
  double identity_defect = 0.0;      // |T - (p-1)/(p+1) Q| / |T| with the physical quadratic / power split
  double second_variation = 0.0;     // centered difference of T(l z) at l = 1
  std::array<double, 5> ray_lambdas{0.5, 0.9, 1.0, 1.1, 2.0};
  std::array<double, 5> ray_values{};
  bool ray_maximum = false;
  double lower_bound_ratio = 0.0;    // T / (|zeta|_Ytilde^2 / 12)
  bool S_negative = false;
  bool T_positive = false;

  bool passed(double tol) const {
    return nehari_defect <= tol && second_variation < 0.0 && ray_maximum && lower_bound_ratio >= 1.0 && S_negative &&
           T_positive;
  }
};

struct GroundState {
  explicit GroundState(const Grid2D& g) : field(g), physical(g) {}
  SolverConfig config;
  Field field;     // the unknown: zeta (kp0, fdkp_reduced) or u (fdkp_direct)
  Field physical;  // u on the FDKP grid, or zeta for kp0
  double T = 0.0, Q = 0.0, S = 0.0, remainder = 0.0;
  double physical_Q = 0.0, physical_S = 0.0;  // quadratic / power split of the physical functional, T scale
  double grad_norm = 0.0;
  double residual = 0.0;
  double ytilde_norm = 0.0;  // |zeta|_Ytilde of the KP picture
  double nonvanishing = 0.0;
  std::vector<double> lambdas;
  int iterations = 0;
  double wall_time = 0.0;
  std::vector<HistoryRow> history;
  Certificates certificates;
  std::optional<ReductionState> reduction;
};

namespace detail {

// Offset from sample (ic, jc) to the nearest minimum of the trigonometric interpolant, by Newton
// on the interpolant gradient. Nyquist modes are left out, as in spectral_shift.
inline std::array<double, 2> interpolant_minimum(const Field& z, std::size_t ic, std::size_t jc) {
  const Grid2D& g = z.grid();
  const Spectrum s = forward_transform(z);
  const double x0 = g.lx() * static_cast<double>(ic) / static_cast<double>(g.nx());
  const double y0 = g.ly() * static_cast<double>(jc) / static_cast<double>(g.ny());
  const double hx = g.lx() / static_cast<double>(g.nx()), hy = g.ly() / static_cast<double>(g.ny());
  double dx = 0.0, dy = 0.0;
  for (int n = 0; n < 8; ++n) {
    double gx = 0.0, gy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j) {
      if (j == g.ny() / 2) continue;
      for (std::size_t i = 0; i < g.nkx(); ++i) {
        if (i == g.nx() / 2) continue;
        const double a = g.k1(i), b = g.k2(j), w = g.multiplicity(i);
        const cplx c = s(i, j) * std::polar(w, a * (x0 + dx) + b * (y0 + dy));
        gx -= a * c.imag();
        gy -= b * c.imag();
        hxx -= a * a * c.real();
        hxy -= a * b * c.real();
        hyy -= b * b * c.real();
      }
    }
    const double det = hxx * hyy - hxy * hxy;
    if (!(hxx > 0.0) || !(det > 0.0)) return {0.0, 0.0};
    const double sx = (hyy * gx - hxy * gy) / det, sy = (hxx * gy - hxy * gx) / det;
    dx -= sx;
    dy -= sy;
    if (std::abs(dx) > hx || std::abs(dy) > hy) return {0.0, 0.0};
    if (std::abs(sx) < 1e-12 * hx && std::abs(sy) < 1e-12 * hy) break;
  }
  return {dx, dy};
}

// Moves the trough to the box center: whole samples by a roll, then the sub-sample remainder
// by a phase shift once it exceeds 1e-4 of a cell. Centering the interpolant minimum on a sample
// keeps the iterate near a lattice-symmetric position, where translation carries no gradient.
inline Field recenter(const Field& z, bool* shifted = nullptr) {
  if (shifted) *shifted = false;
  const Grid2D& g = z.grid();
  std::size_t best = 0;
  for (std::size_t q = 1; q < g.size(); ++q)
    if (z.values()[q] < z.values()[best]) best = q;
  const long di = static_cast<long>(g.nx() / 2) - static_cast<long>(best % g.nx());
  const long dj = static_cast<long>(g.ny() / 2) - static_cast<long>(best / g.nx());
  Field out = (di == 0 && dj == 0) ? z : cyclic_shift(z, di, dj);
  if (shifted) *shifted = di != 0 || dj != 0;
  const auto off = interpolant_minimum(out, g.nx() / 2, g.ny() / 2);
  const double hx = g.lx() / static_cast<double>(g.nx()), hy = g.ly() / static_cast<double>(g.ny());
  if (std::abs(off[0]) > 1e-4 * hx || std::abs(off[1]) > 1e-4 * hy) {
    out = spectral_shift(out, -off[0], -off[1]);
    if (shifted) *shifted = true;
  }
  return out;
}

inline double ytilde_of_kp_picture(const Problem& prob, const Field& z) {
  return norm(prob.kp_picture(z), NormKind::ytilde(prob.config().beta, true));
}

}  // namespace detail

// Certificates of membership in the constraint set and of the ray geometry.
inline Certificates certify(const Problem& prob, const Field& z, const Evaluation& e) {
  Certificates c;
  const double T = e.f.value;
  c.nehari_defect = std::abs(detail::ray_derivative(e, z)) / std::max(1.0, std::abs(T));
  const int p = prob.config().p;
  double Qp = e.f.Q, Sp = e.f.S;
  if (e.reduced) {
    Qp = e.reduced->scaled.Q;
    Sp = e.reduced->scaled.S;
  }
  c.identity_defect = std::abs(T - (p - 1.0) / (p + 1.0) * Qp) / std::abs(T);
  (void)Sp;
  const double h = 1e-3;
  const double tp = prob.evaluate((1.0 + h) * z, false).f.value, tm = prob.evaluate((1.0 - h) * z, false).f.value;
  c.second_variation = (tp - 2.0 * T + tm) / (h * h);
  c.ray_maximum = true;
  for (std::size_t k = 0; k < c.ray_lambdas.size(); ++k) {
    const double l = c.ray_lambdas[k];
    c.ray_values[k] = l == 1.0 ? T : prob.evaluate(l * z, false).f.value;
    if (l != 1.0 && !(c.ray_values[k] < T)) c.ray_maximum = false;
  }
  const double yn = detail::ytilde_of_kp_picture(prob, z);
  c.lower_bound_ratio = yn > 0.0 ? T / (yn * yn / 12.0) : 0.0;
  c.S_negative = (e.reduced ? e.reduced->scaled.S : e.f.S) < 0.0;
  c.T_positive = T > 0.0;
  prob.evaluate(z, false);  // leave the warm start at z
  return c;
}

namespace detail {

inline void fill_ground_state(GroundState& gs, const Problem& prob, const Field& z, const Evaluation& e) {
  gs.field = z;
  gs.physical = prob.physical(z, &e);
  gs.T = e.f.value;
  gs.Q = e.f.Q;
  gs.S = e.f.S;
  gs.remainder = e.f.remainder;
  gs.physical_Q = e.reduced ? e.reduced->scaled.Q : e.f.Q;
  gs.physical_S = e.reduced ? e.reduced->scaled.S : e.f.S;
  gs.residual = e.residual;
  gs.ytilde_norm = ytilde_of_kp_picture(prob, z);
  gs.nonvanishing = nonvanishing_diagnostic(prob.kp_picture(z));
  if (e.reduced) gs.reduction = e.reduced->state;
  gs.certificates = certify(prob, z, e);
}

inline Field oriented(const Problem& prob, Field z) {
  z = prob.constrain(z);
  const FunctionalValue f = prob.evaluate(z, false).f;
  if (f.S >= 0.0) z *= -1.0;
  return z;
}

}  // namespace detail

// Initial iterate on the unknown's grid.
inline Field initial_guess(const Problem& prob, const std::optional<Field>& file_field = std::nullopt) {
  const SolverConfig& cfg = prob.config();
  const Grid2D& g = prob.grid();
  switch (cfg.initial_guess) {
    case InitialGuess::file:
      if (!file_field) throw InvalidArgument("initial_guess=file needs an initial field");
      require_same_grid(file_field->grid(), g, "initial field");
      return *file_field;
    case InitialGuess::lump: {
      if (cfg.target == Target::fdkp_direct) return lump_sample(LumpParams{cfg.beta, cfg.eps}, g);
      return lump_sample(LumpParams{cfg.beta, 1.0}, g);
    }
    case InitialGuess::gaussian: {
      // a trough of depth 4 at a seeded offset within one unit of the center
      std::mt19937_64 rng(cfg.seed);
      auto unit = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; };
      const double cx = unit(), cy = unit();
      const bool fd = cfg.target == Target::fdkp_direct;
      const double sx = fd ? 1.0 / cfg.eps : 1.0, sy = fd ? 1.0 / (cfg.eps * cfg.eps) : 1.0;
      const double amp = fd ? cfg.eps * cfg.eps : 1.0;
      std::vector<double> v(g.size());
      for (std::size_t j = 0; j < g.ny(); ++j)
        for (std::size_t i = 0; i < g.nx(); ++i) {
          const double X = g.x(i) / sx - cx, Y = g.y(j) / sy - cy;
          v[g.index(i, j)] = -4.0 * amp * std::exp(-(X * X + Y * Y) / 4.0);
        }
      return project_zero_xmean(Field(g, std::move(v)));
    }
  }
  return Field(g);
}

// Projected preconditioned descent on the constraint set.
inline GroundState minimize_nehari(const Problem& prob, const Field& initial) {
  const auto t_start = std::chrono::steady_clock::now();
  const SolverConfig& cfg = prob.config();
  GroundState gs(prob.grid());
  gs.config = cfg;
  prob.reset_warm_start();

  Field z = detail::oriented(prob, initial);
  Projection pr = nehari_project(z, prob);
  bool shifted = false;
  z = detail::recenter(pr.field, &shifted);
  Evaluation e = std::move(pr.eval);
  if (shifted) {
    prob.reset_warm_start();
    Projection rp = nehari_project(z, prob);
    z = std::move(rp.field);
    e = std::move(rp.eval);
  }
  gs.lambdas.push_back(pr.lambda);

  double best_T = e.f.value, best_g = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  double nonvanishing = 0.0;
  double lambda = pr.lambda;
  for (int it = 0;; ++it) {
    const Spectrum gh = forward_transform(*e.f.gradient);
    const Spectrum zh = forward_transform(z);
    const double gn = prob.dual_norm_of(gh) / prob.primal_norm(zh);
    if (cfg.nonvanishing_every > 0 && it % cfg.nonvanishing_every == 0)
      nonvanishing = nonvanishing_diagnostic(prob.kp_picture(z));
    gs.history.push_back({it, e.f.value, e.f.Q, e.f.S, lambda, gn, e.residual, nonvanishing});
    gs.grad_norm = gn;
    gs.iterations = it;
    if (gn <= cfg.grad_tol) break;
    if (it >= cfg.max_iter) {
      std::ostringstream os;
      os << "max_iter=" << cfg.max_iter << " reached with grad_norm=" << gn << " T=" << e.f.value;
      throw SolverError(SolverFailure::not_converged, os.str());
    }
    if (e.f.value < best_T - 1e-15 * std::abs(best_T) || gn < best_g) {
      since_improvement = 0;
      best_T = std::min(best_T, e.f.value);
      best_g = std::min(best_g, gn);
    } else if (++since_improvement >= cfg.stall_window) {
      std::ostringstream os;
      os << "no decrease of T or of the gradient norm for " << cfg.stall_window << " iterations (T=" << e.f.value
         << ", grad_norm=" << gn << ", best grad_norm=" << best_g << ")";
      throw SolverError(SolverFailure::stalled, os.str());
    }

    const Field step = Field::from_spectrum(prob.apply_inverse_preconditioner(gh));
    double tau = cfg.tau;
    bool accepted = false;
    const double allowance = 1e-13 * std::abs(e.f.value);
    for (int h = 0; h <= 30; ++h, tau *= 0.5) {
      Field trial = z;
      trial.axpy(-tau, step);
      trial = prob.constrain(trial);
      Projection tp = nehari_project(trial, prob);
      if (tp.eval.f.value <= e.f.value + allowance) {
        lambda = tp.lambda;
        gs.lambdas.push_back(lambda);
        z = detail::recenter(tp.field, &shifted);
        e = std::move(tp.eval);
        if (shifted) {
          prob.reset_warm_start();
          Projection rp = nehari_project(z, prob);
          z = std::move(rp.field);
          e = std::move(rp.eval);
        }
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::ostringstream os;
      os << "line search found no decrease after 30 halvings (T=" << e.f.value << ", grad_norm=" << gn << ")";
      throw SolverError(SolverFailure::stalled, os.str());
    }
  }

  detail::fill_ground_state(gs, prob, z, e);
  gs.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return gs;
}

// Power-stabilized fixed point iteration for L u + sign P(u^p) = 0.
inline GroundState petviashvili(const Problem& prob, const Field& initial) {
  const auto t_start = std::chrono::steady_clock::now();
  const SolverConfig& cfg = prob.config();
  if (prob.has_remainder()) throw InvalidArgument("petviashvili has no fdkp_reduced form");
  GroundState gs(prob.grid());
  gs.config = cfg;
  const int p = cfg.p;
  const double sigma = power_sign(p);
  const double gamma = static_cast<double>(p) / (p - 1);
  const Multiplier& L = prob.linear_operator();
  const Discretization disc = cfg.disc();
  const double floor = 1e3 * std::numeric_limits<double>::epsilon();

  Field u = prob.constrain(initial);
  double prev = std::numeric_limits<double>::infinity();
  int rising = 0;
  for (int it = 0;; ++it) {
    const Spectrum uh = forward_transform(u);
    Spectrum nh = project_zero_xmean(power_spectrum(u, p, disc.dealias));
    nh *= -sigma;
    const double lu_u = weighted_energy(uh, L);
    const double n_u = inner_l2(nh, uh);
    const double sf = lu_u / n_u;
    if (!(sf > 0.0)) {
      std::ostringstream os;
      os << "stabilizing factor " << sf << " at iteration " << it << "; negate the initial guess";
      throw SolverError(SolverFailure::wrong_sign_branch, os.str());
    }
    const Evaluation e = prob.evaluate(u, true);
    const double res = e.residual;
    gs.history.push_back({it, e.f.value, e.f.Q, e.f.S, sf, std::abs(sf - 1.0), res, 0.0});
    gs.iterations = it;
    if (std::abs(sf - 1.0) <= cfg.residual_tol && res <= cfg.residual_tol) break;
    if (res > floor && prev > floor && res >= prev) {
      if (++rising >= 3) {
        std::ostringstream os;
        os << "residual not contracting for 3 steps at iteration " << it << " (" << prev << " -> " << res << ")";
        throw SolverError(SolverFailure::diverged, os.str());
      }
    } else {
      rising = 0;
    }
    prev = res;
    if (it >= cfg.max_iter) {
      std::ostringstream os;
      os << "max_iter=" << cfg.max_iter << " reached with residual=" << res << " |S_f - 1|=" << std::abs(sf - 1.0);
      throw SolverError(SolverFailure::not_converged, os.str());
    }
    const double fac = std::pow(sf, gamma);
    for (std::size_t q = 0; q < nh.data().size(); ++q) nh.data()[q] = L[q] > 0.0 ? fac * nh.data()[q] / L[q] : 0.0;
    u = detail::recenter(Field::from_spectrum(std::move(nh)));
  }
  const Evaluation e = prob.evaluate(u, true);
  gs.grad_norm = prob.dual_norm_of(forward_transform(*e.f.gradient)) / prob.primal_norm(forward_transform(u));
  detail::fill_ground_state(gs, prob, u, e);
  gs.history.back().nonvanishing = gs.nonvanishing;
  gs.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return gs;
}

inline GroundState solve(const Problem& prob, const Field& initial) {
  return prob.config().method == Method::nehari_pg ? minimize_nehari(prob, initial) : petviashvili(prob, initial);
}

}  // namespace fdkp
