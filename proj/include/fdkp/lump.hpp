#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fdkp/grid.hpp"
#include "fdkp/log.hpp"
#include "fdkp/norms.hpp"
#include "json.hpp"

namespace fdkp {

struct LumpParams {
  double beta = 7.0 / 3.0;
  double eps = 1.0;  // speed parameter of the scaled family, 1 = unit speed
  double x0 = 0.0;
  double y0 = 0.0;

  void validate() const {
    if (!(beta > 1.0 / 3.0)) throw InvalidArgument("lump: beta must exceed 1/3");
    if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("lump: eps must lie in (0, 1]");
  }
};

// Closed-form lump and its first derivatives in physical coordinates relative to the center.
class LumpProfile {
 public:
  explicit LumpProfile(const LumpParams& p) : eps_(p.eps), inv_sqrt_a_(1.0 / std::sqrt(kp_coefficient(p.beta))) {
    p.validate();
  }

  double value(double x, double y) const {
    const auto [X, Y] = scaled(x, y);
    const double d = 3.0 + X * X + Y * Y;
    return eps_ * eps_ * (-12.0 * (3.0 - X * X + Y * Y) / (d * d));
  }
  double dx(double x, double y) const {
    const auto [X, Y] = scaled(x, y);
    const double d = 3.0 + X * X + Y * Y;
    return eps_ * eps_ * eps_ * inv_sqrt_a_ * (24.0 * X * (9.0 - X * X + 3.0 * Y * Y) / (d * d * d));
  }
  double dy(double x, double y) const {
    const auto [X, Y] = scaled(x, y);
    const double d = 3.0 + X * X + Y * Y;
    return eps_ * eps_ * eps_ * eps_ * inv_sqrt_a_ * (-24.0 * Y * (3.0 * X * X - Y * Y - 3.0) / (d * d * d));
  }

 private:
  std::pair<double, double> scaled(double x, double y) const {
    return {eps_ * x * inv_sqrt_a_, eps_ * eps_ * y * inv_sqrt_a_};
  }
  double eps_;
  double inv_sqrt_a_;
};

// Samples the lump on the grid and removes the per-row x-mean.
inline Field lump_sample(const LumpParams& params, const Grid2D& grid) {
  const LumpProfile prof(params);
  std::vector<double> v(grid.size());
  for (std::size_t j = 0; j < grid.ny(); ++j)
    for (std::size_t i = 0; i < grid.nx(); ++i) v[grid.index(i, j)] = prof.value(grid.x(i) - params.x0, grid.y(j) - params.y0);
  Field raw(grid, std::move(v));
  double edge = 0.0;
  for (std::size_t i = 0; i < grid.nx(); ++i) edge = std::max(edge, std::abs(raw(i, 0)));
  for (std::size_t j = 0; j < grid.ny(); ++j) edge = std::max(edge, std::abs(raw(0, j)));
  const double center = std::abs(prof.value(0.0, 0.0));
  if (edge > 1e-2 * center)
    warn("lump_sample: boundary amplitude " + std::to_string(edge / center) + " of the center value; enlarge the box");
  return project_zero_xmean(raw);
}

struct QuadratureConfig {
  double half_width = 100.0;  // truncated box [-R, R]^2; the tail is extrapolated from R and 2R
  bool extrapolate_tail = true;
  double tol = 1e-11;
  unsigned max_depth = 18;
};

struct LumpOracle {
  double Q = 0.0;
  double S = 0.0;
  double T0 = 0.0;
  double mass = 0.0;
  double mass_y = 0.0;   // integral of (d_x^{-1} d_y u)^2
  double mass_dx = 0.0;  // integral of u_x^2
  double beta = 0.0;
  double eps = 0.0;
  double half_width = 0.0;
  double tol = 0.0;
  double max_error_estimate = 0.0;
  bool extrapolated = false;
};

inline void to_json(nlohmann::json& j, const LumpOracle& o) {
  j = nlohmann::json{{"Q", o.Q},
                     {"S", o.S},
                     {"T0", o.T0},
                     {"mass", o.mass},
                     {"mass_y", o.mass_y},
                     {"mass_dx", o.mass_dx},
                     {"quadrature",
                      {{"method", "nested adaptive Gauss-Kronrod 61"},
                       {"beta", o.beta},
                       {"eps", o.eps},
                       {"half_width", o.half_width},
                       {"tol", o.tol},
                       {"max_error_estimate", o.max_error_estimate},
                       {"tail_extrapolation", o.extrapolated ? "richardson R^-2 from R and 2R" : "none"}}}};
}

namespace detail {

class OracleIntegrator {
 public:
  OracleIntegrator(const LumpProfile& prof, const QuadratureConfig& cfg) : prof_(prof), cfg_(cfg) {}

  template <class F>
  double integrate_1d(F&& f, double a, double b) {
    double err = 0.0, l1 = 0.0;
    const double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, cfg_.max_depth, cfg_.tol, &err, &l1);
    track(err, l1);
    return v;
  }

  // Integral over [-R, R]^2 of an integrand even in x and y.
  template <class F>
  double integrate_even_box(F&& f, double r) {
    auto row = [&](double y) { return integrate_1d([&](double x) { return f(x, y); }, 0.0, r); };
    return 4.0 * integrate_1d(row, 0.0, r);
  }

  // (d_x^{-1} d_y u)(x, y) by quadrature of u_y over (-inf, x].
  double antiderivative_dy(double x, double y) {
    return integrate_1d([&](double s) { return prof_.dy(s, y); }, -std::numeric_limits<double>::infinity(), x);
  }

  double max_relative_error() const { return max_rel_; }

 private:
  void track(double err, double l1) {
    if (l1 > 0.0) max_rel_ = std::max(max_rel_, err / l1);
  }
  const LumpProfile& prof_;
  QuadratureConfig cfg_;
  double max_rel_ = 0.0;
};

}  // namespace detail

// Reference values of the KP functional on the exact lump, computed in real space by quadrature.
inline LumpOracle lump_oracle_scalars(const LumpParams& params, const QuadratureConfig& cfg = {}) {
  params.validate();
  if (!(cfg.half_width > 0.0) || !(cfg.tol > 0.0)) throw InvalidArgument("quadrature: half width and tol must be positive");
  const LumpProfile prof(params);
  detail::OracleIntegrator in(prof, cfg);
  auto pieces = [&](double r) {
    std::array<double, 4> out{};
    out[0] = in.integrate_even_box([&](double x, double y) { const double u = prof.value(x, y); return u * u; }, r);
    out[1] = in.integrate_even_box([&](double x, double y) { const double v = in.antiderivative_dy(x, y); return v * v; }, r);
    out[2] = in.integrate_even_box([&](double x, double y) { const double d = prof.dx(x, y); return d * d; }, r);
    out[3] = in.integrate_even_box([&](double x, double y) { const double u = prof.value(x, y); return u * u * u; }, r);
    return out;
  };
  std::array<double, 4> p = pieces(cfg.half_width);
  if (cfg.extrapolate_tail) {
    const std::array<double, 4> p2 = pieces(2.0 * cfg.half_width);
    for (int k = 0; k < 4; ++k) p[k] = (4.0 * p2[k] - p[k]) / 3.0;
  }
  if (in.max_relative_error() > 1e-6)
    throw SolverError(SolverFailure::quadrature, "lump oracle quadrature error estimate " + std::to_string(in.max_relative_error()));
  const double a = kp_coefficient(params.beta);
  LumpOracle o;
  o.mass = p[0];
  o.mass_y = p[1];
  o.mass_dx = p[2];
  o.Q = 0.5 * (p[0] + p[1] + a * p[2]);
  o.S = p[3] / 3.0;
  o.T0 = o.Q + o.S;
  o.beta = params.beta;
  o.eps = params.eps;
  o.half_width = cfg.half_width;
  o.tol = cfg.tol;
  o.max_error_estimate = in.max_relative_error();
  o.extrapolated = cfg.extrapolate_tail;
  return o;
}

}  // namespace fdkp
