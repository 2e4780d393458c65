#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "fdkp/grid.hpp"
#include "fdkp/norms.hpp"

namespace fdkp {

namespace detail {

inline double tanh_over(double r) {
  if (r < 1e-4) {
    const double r2 = r * r;
    return 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0;
  }
  return std::tanh(r) / r;
}

inline std::string point_str(double k1, double k2) {
  std::ostringstream os;
  os.precision(17);
  os << "(k1=" << k1 << ", k2=" << k2 << ")";
  return os.str();
}

}  // namespace detail

// Full-dispersion symbol.
inline double eval_m(double k1, double k2, double beta) {
  if (k1 == 0.0) {
    if (k2 == 0.0) return 1.0;
    throw InvalidArgument("eval_m: direction undefined at " + detail::point_str(k1, k2));
  }
  const double r = std::hypot(k1, k2);
  const double base = (1.0 + beta * r * r) * detail::tanh_over(r);
  return std::sqrt(base) * std::sqrt(1.0 + 2.0 * (k2 * k2) / (k1 * k1));
}

// Long-wave symbol, positive-definite form.
inline double eval_mtilde(double k1, double k2, double beta) {
  if (k1 == 0.0) throw InvalidArgument("eval_mtilde: undefined at " + detail::point_str(k1, k2));
  return 1.0 + (k2 * k2) / (k1 * k1) + kp_coefficient(beta) * k1 * k1;
}

inline bool cone_indicator(double k1, double k2, double delta) {
  if (k1 == 0.0) return k2 == 0.0;
  return std::hypot(k1, k2) <= delta && std::abs(k2 / k1) <= delta;
}

struct SymbolDiagnostics {
  double min_n_offcone = std::numeric_limits<double>::infinity();
  double min_n_k1 = 0.0, min_n_k2 = 0.0;
  double ratio_min = std::numeric_limits<double>::infinity();  // (n/ntilde)^{1/2} on the cone
  double ratio_max = 0.0;
  double ratio_constant = 0.0;  // max |ratio - 1| / delta^2
  std::size_t cone_modes = 0;
  std::size_t scaled_cone_modes = 0;
};

// Multipliers on the half lattice of one grid. Every array vanishes on the k1 = 0 column.
struct SymbolTable {
  Grid2D grid;
  double beta;
  double delta;
  double eps;
  Multiplier m, mtilde, n, ntilde;
  Multiplier chi;            // cone C
  Multiplier chi_eps;        // chi(eps k1, eps^2 k2)
  Multiplier inv_n_offcone;  // (1 - chi) / n
  Multiplier ratio;          // (n/ntilde)^{1/2} chi
  Multiplier inv_ratio;      // (ntilde/n)^{1/2} chi
  SymbolDiagnostics diag;

  double kp_a() const { return kp_coefficient(beta); }
};

inline SymbolTable build_table(const Grid2D& grid, double beta, double delta, double eps) {
  if (!(beta > 1.0 / 3.0)) throw InvalidArgument("build_table: beta must exceed 1/3");
  if (!(delta > 0.0 && delta <= 0.5)) throw InvalidArgument("build_table: delta must lie in (0, 0.5]");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("build_table: eps must lie in (0, 1)");
  const std::size_t ns = grid.spectral_size();
  SymbolTable t{grid, beta, delta, eps, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}};
  for (Multiplier* a : {&t.m, &t.mtilde, &t.n, &t.ntilde, &t.chi, &t.chi_eps, &t.inv_n_offcone, &t.ratio, &t.inv_ratio})
    a->assign(ns, 0.0);
  SymbolDiagnostics& d = t.diag;
  for (std::size_t j = 0; j < grid.ny(); ++j) {
    const double k2 = grid.k2(j);
    for (std::size_t i = 1; i < grid.nkx(); ++i) {
      const double k1 = grid.k1(i);
      const std::size_t q = grid.spectral_index(i, j);
      const double m = eval_m(k1, k2, beta);
      const double mt = eval_mtilde(k1, k2, beta);
      const double n = m - 1.0;
      const double nt = mt - 1.0;
      if (!(m >= 1.0)) throw InvariantViolation("build_table: m < 1 at " + detail::point_str(k1, k2));
      if (!(nt > 0.0)) throw InvariantViolation("build_table: ntilde <= 0 at " + detail::point_str(k1, k2));
      t.m[q] = m;
      t.mtilde[q] = mt;
      t.n[q] = n;
      t.ntilde[q] = nt;
      const bool in = cone_indicator(k1, k2, delta);
      t.chi[q] = in ? 1.0 : 0.0;
      t.chi_eps[q] = cone_indicator(eps * k1, eps * eps * k2, delta) ? 1.0 : 0.0;
      if (in) {
        const double r = std::sqrt(n / nt);
        t.ratio[q] = r;
        t.inv_ratio[q] = 1.0 / r;
        d.ratio_min = std::min(d.ratio_min, r);
        d.ratio_max = std::max(d.ratio_max, r);
        d.ratio_constant = std::max(d.ratio_constant, std::abs(r - 1.0) / (delta * delta));
        ++d.cone_modes;
      } else {
        if (!(n > 1e-12)) throw InvariantViolation("build_table: n vanishes off the cone at " + detail::point_str(k1, k2));
        t.inv_n_offcone[q] = 1.0 / n;
        if (n < d.min_n_offcone) {
          d.min_n_offcone = n;
          d.min_n_k1 = k1;
          d.min_n_k2 = k2;
        }
      }
      if (t.chi_eps[q] > 0.0) ++d.scaled_cone_modes;
    }
  }
  return t;
}

// Full-lattice image of a half-lattice multiplier, FFT index order (x fastest).
inline std::vector<double> full_lattice(const Grid2D& g, const Multiplier& a) {
  std::vector<double> out(g.size(), 0.0);
  for (std::size_t j = 0; j < g.ny(); ++j) {
    const std::size_t jm = (g.ny() - j) % g.ny();
    for (std::size_t i = 0; i < g.nx(); ++i) {
      if (i < g.nkx())
        out[g.index(i, j)] = a[g.spectral_index(i, j)];
      else
        out[g.index(i, j)] = a[g.spectral_index(g.nx() - i, jm)];
    }
  }
  return out;
}

}  // namespace fdkp
