#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "fdkp/grid.hpp"

namespace fdkp {

// Integrals of zeta^2 over the unit tiles [a, a+1] x [b, b+1] of the box, a and b counted from
// the lower-left corner. The square is formed on a doubled lattice, so it is the exact square of
// the trigonometric interpolant and the tile integrals are exact up to round-off.
struct TileEnergies {
  std::size_t tx = 0, ty = 0;
  std::vector<double> e;  // row-major, x fastest
  double x0 = 0.0, y0 = 0.0;  // lower-left corner of tile (0, 0)

  double operator()(std::size_t a, std::size_t b) const { return e[b * tx + a]; }
};

namespace detail {

// int_{-1/2}^{1/2} e^{ik s} ds
inline double box_factor(double k) {
  const double h = 0.5 * k;
  return std::abs(h) < 1e-8 ? 1.0 - h * h / 6.0 : std::sin(h) / h;
}

inline bool integral_length(double l) { return l >= 1.0 && std::abs(l - std::round(l)) <= 1e-9 * l; }

}  // namespace detail

inline TileEnergies tile_energies(const Field& zeta) {
  const Grid2D& g = zeta.grid();
  TileEnergies out;
  out.tx = static_cast<std::size_t>(std::floor(g.lx() + 1e-9));
  out.ty = static_cast<std::size_t>(std::floor(g.ly() + 1e-9));
  out.x0 = -0.5 * g.lx();
  out.y0 = -0.5 * g.ly();
  if (out.tx == 0 || out.ty == 0) return out;

  const Grid2D pg(2 * g.nx(), 2 * g.ny(), g.lx(), g.ly());
  std::vector<double> sq = Field::from_spectrum(detail::resample_spectrum(forward_transform(zeta), pg)).values();
  for (auto& v : sq) v *= v;
  const Spectrum c = forward_transform(Field(pg, std::move(sq)));
  const double scale = 1.0 / std::sqrt(g.lx() * g.ly());
  const std::size_t tx = out.tx, ty = out.ty;
  out.e.assign(tx * ty, 0.0);

  // weighted coefficient m_i B(k1) B(k2) e^{i(k1 + k2)/2} c / sqrt(lx ly); the tile (a, b) integral
  // is Re sum of it times e^{i(k1 a + k2 b)}
  auto weighted = [&](std::size_t i, std::size_t j) {
    const double k1 = pg.k1(i), k2 = pg.k2(j);
    return pg.multiplicity(i) * detail::box_factor(k1) * detail::box_factor(k2) * std::polar(scale, 0.5 * (k1 + k2)) *
           c(i, j);
  };

  if (detail::integral_length(g.lx()) && detail::integral_length(g.ly()) &&
      static_cast<std::size_t>(std::round(g.lx())) == tx && static_cast<std::size_t>(std::round(g.ly())) == ty) {
    // e^{i k1 a} = e^{2 pi i n1 a / tx}: fold mode numbers modulo the tile counts, then a small DFT
    std::vector<cplx> d(tx * ty, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < pg.ny(); ++j) {
      const long n2 = Grid2D::signed_mode(j, pg.ny());
      const std::size_t m2 = static_cast<std::size_t>(((n2 % static_cast<long>(ty)) + static_cast<long>(ty)) % static_cast<long>(ty));
      for (std::size_t i = 0; i < pg.nkx(); ++i) d[m2 * tx + i % tx] += weighted(i, j);
    }
    std::vector<cplx> half(tx * ty);
    for (std::size_t m2 = 0; m2 < ty; ++m2)
      for (std::size_t a = 0; a < tx; ++a) {
        cplx s(0.0, 0.0);
        for (std::size_t m1 = 0; m1 < tx; ++m1)
          s += d[m2 * tx + m1] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((m1 * a) % tx) / tx);
        half[m2 * tx + a] = s;
      }
    for (std::size_t b = 0; b < ty; ++b)
      for (std::size_t a = 0; a < tx; ++a) {
        cplx s(0.0, 0.0);
        for (std::size_t m2 = 0; m2 < ty; ++m2)
          s += half[m2 * tx + a] * std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>((m2 * b) % ty) / ty);
        out.e[b * tx + a] = s.real();
      }
    return out;
  }

  // general box: separable direct sums
  std::vector<cplx> rows(ty * pg.nkx(), cplx(0.0, 0.0));
  for (std::size_t j = 0; j < pg.ny(); ++j) {
    const double k2 = pg.k2(j);
    for (std::size_t b = 0; b < ty; ++b) {
      const cplx ph = std::polar(1.0, k2 * static_cast<double>(b));
      for (std::size_t i = 0; i < pg.nkx(); ++i) rows[b * pg.nkx() + i] += ph * weighted(i, j);
    }
  }
  for (std::size_t b = 0; b < ty; ++b)
    for (std::size_t a = 0; a < tx; ++a) {
      double s = 0.0;
      for (std::size_t i = 0; i < pg.nkx(); ++i)
        s += (std::polar(1.0, pg.k1(i) * static_cast<double>(a)) * rows[b * pg.nkx() + i]).real();
      out.e[b * tx + a] = s;
    }
  return out;
}

// sup over unit tiles of the local L2 norm.
inline double nonvanishing_diagnostic(const Field& zeta) {
  const TileEnergies t = tile_energies(zeta);
  double best = 0.0;
  for (double v : t.e) best = std::max(best, v);
  return std::sqrt(best);
}

struct Alignment {
  double shift_x = 0.0, shift_y = 0.0;  // moving(x - s) best matches reference(x)
  double distance = 0.0;                // |reference - shifted moving|_L2 / |reference|_L2
  Field aligned;
};

// Maximizes the cross-correlation <a, b(. - s)> over s: integer lattice search, then Newton
// refinement on the spectral interpolant.
inline Alignment align(const Field& reference, const Field& moving) {
  require_same_grid(reference.grid(), moving.grid(), "align");
  const Grid2D& g = reference.grid();
  const Spectrum a = forward_transform(reference), b = forward_transform(moving);
  Spectrum d(g);
  for (std::size_t q = 0; q < d.data().size(); ++q) d.data()[q] = a.data()[q] * std::conj(b.data()[q]);
  // correlation at s = (i dx, j dy) is proportional to the synthesized sample (i, j)
  const Field corr = Field::from_spectrum(d);
  std::size_t best = 0;
  for (std::size_t q = 1; q < g.size(); ++q)
    if (corr.values()[q] > corr.values()[best]) best = q;
  auto wrap = [](double s, double l) { return s > 0.5 * l ? s - l : s; };
  double sx = wrap(static_cast<double>(best % g.nx()) * g.dx(), g.lx());
  double sy = wrap(static_cast<double>(best / g.nx()) * g.dy(), g.ly());

  for (int it = 0; it < 30; ++it) {
    double gx = 0.0, gy = 0.0, hxx = 0.0, hxy = 0.0, hyy = 0.0;
    for (std::size_t j = 0; j < g.ny(); ++j)
      for (std::size_t i = 0; i < g.nkx(); ++i) {
        if (i == g.nx() / 2 || j == g.ny() / 2) continue;
        const double k1 = g.k1(i), k2 = g.k2(j);
        const cplx v = g.multiplicity(i) * d(i, j) * std::polar(1.0, k1 * sx + k2 * sy);
        gx -= k1 * v.imag();
        gy -= k2 * v.imag();
        hxx -= k1 * k1 * v.real();
        hxy -= k1 * k2 * v.real();
        hyy -= k2 * k2 * v.real();
      }
    const double det = hxx * hyy - hxy * hxy;
    if (!(hxx < 0.0 && det > 0.0)) break;
    double dx = -(hyy * gx - hxy * gy) / det, dy = -(hxx * gy - hxy * gx) / det;
    const double cap = std::max(g.dx(), g.dy());
    const double len = std::hypot(dx, dy);
    if (len > cap) {
      dx *= cap / len;
      dy *= cap / len;
    }
    sx += dx;
    sy += dy;
    if (len <= 1e-14 * std::max(g.lx(), g.ly())) break;
  }
  Alignment out{sx, sy, 0.0, spectral_shift(moving, sx, sy)};
  const double ref = std::sqrt(inner_l2(a, a));
  const Field diff = reference - out.aligned;
  out.distance = ref > 0.0 ? std::sqrt(inner_l2(diff, diff)) / ref : 0.0;
  return out;
}

}  // namespace fdkp
