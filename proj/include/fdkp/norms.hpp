#pragma once

#include <cmath>
#include <string>

#include "fdkp/grid.hpp"

namespace fdkp {

enum class NormTag { L2, X, Y, Ytilde, Z, Eps };

inline const char* to_string(NormTag t) {
  switch (t) {
    case NormTag::L2: return "L2";
    case NormTag::X: return "X";
    case NormTag::Y: return "Y";
    case NormTag::Ytilde: return "Ytilde";
    case NormTag::Z: return "Z";
    case NormTag::Eps: return "Eps";
  }
  return "?";
}

// Coefficient of k1^2 in the KP symbol.
inline double kp_coefficient(double beta) { return 0.5 * (beta - 1.0 / 3.0); }

struct NormKind {
  NormTag tag = NormTag::L2;
  double s = 2.0;
  double beta = 7.0 / 3.0;
  bool include_beta_weight = true;
  double eps = 0.0;

  static NormKind l2() { return {}; }
  static NormKind x(double s = 2.0) { return {NormTag::X, s}; }
  static NormKind y() { return {NormTag::Y}; }
  static NormKind ytilde(double beta = 7.0 / 3.0, bool include_beta_weight = true) {
    return {NormTag::Ytilde, 2.0, beta, include_beta_weight};
  }
  static NormKind z(double s = 2.0) { return {NormTag::Z, s}; }
  static NormKind epsilon(double eps, double beta = 7.0 / 3.0, bool include_beta_weight = true) {
    return {NormTag::Eps, 2.0, beta, include_beta_weight, eps};
  }

  void validate() const {
    if (!(s > 1.5)) throw InvalidArgument("norm: Sobolev index must exceed 3/2");
    if (!(beta > 1.0 / 3.0)) throw InvalidArgument("norm: beta must exceed 1/3");
    if (tag == NormTag::Eps && !(eps > 0.0 && eps < 1.0)) throw InvalidArgument("norm: eps must lie in (0,1)");
  }

  double k1_coefficient() const { return include_beta_weight ? kp_coefficient(beta) : 1.0; }

  // Weight against |u^(k)|^2; only meaningful for k1 != 0.
  double weight(double k1, double k2) const {
    const double r2 = (k2 * k2) / (k1 * k1);
    const double kk = k1 * k1 + k2 * k2;
    switch (tag) {
      case NormTag::L2: return 1.0;
      case NormTag::Y: return 1.0 + std::sqrt(r2) + std::pow(kk, 0.75) / std::abs(k1);
      case NormTag::Ytilde: return 1.0 + r2 + k1_coefficient() * k1 * k1;
      case NormTag::X: return 1.0 + r2 + r2 * k2 * k2 + std::pow(kk, s);
      case NormTag::Z: return 1.0 + std::sqrt(kk) + k1 * k1 * std::pow(kk, s - 1.5);
      case NormTag::Eps: return 1.0 + (r2 + k1_coefficient() * k1 * k1) / (eps * eps);
    }
    return 1.0;
  }
};

// Weight array on the half lattice, zero on the k1 = 0 column.
inline Multiplier norm_weights(const Grid2D& g, const NormKind& kind) {
  kind.validate();
  Multiplier w(g.spectral_size(), 0.0);
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 1; i < g.nkx(); ++i) w[g.spectral_index(i, j)] = kind.weight(g.k1(i), g.k2(j));
  return w;
}

inline double norm(const Spectrum& s, const NormKind& kind) {
  require_zero_xmean(s, "norm");
  return std::sqrt(weighted_energy(s, norm_weights(s.grid(), kind)));
}

inline double norm(const Field& f, const NormKind& kind) { return norm(forward_transform(f), kind); }

// Norm in the dual pairing: sqrt(sum |c|^2 / w).
inline double dual_norm(const Spectrum& s, const NormKind& kind) {
  require_zero_xmean(s, "dual_norm");
  Multiplier w = norm_weights(s.grid(), kind);
  for (auto& v : w) v = v > 0.0 ? 1.0 / v : 0.0;
  return std::sqrt(weighted_energy(s, w));
}

inline double inner_ytilde(const Spectrum& a, const Spectrum& b, double beta = 7.0 / 3.0,
                           bool include_beta_weight = true) {
  require_same_grid(a.grid(), b.grid(), "inner_ytilde");
  require_zero_xmean(a, "inner_ytilde");
  require_zero_xmean(b, "inner_ytilde");
  const Grid2D& g = a.grid();
  const Multiplier w = norm_weights(g, NormKind::ytilde(beta, include_beta_weight));
  double s = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 1; i < g.nkx(); ++i) {
      const std::size_t q = g.spectral_index(i, j);
      s += g.multiplicity(i) * w[q] * (a.data()[q].real() * b.data()[q].real() + a.data()[q].imag() * b.data()[q].imag());
    }
  return s;
}

inline double inner_ytilde(const Field& a, const Field& b, double beta = 7.0 / 3.0, bool include_beta_weight = true) {
  return inner_ytilde(forward_transform(a), forward_transform(b), beta, include_beta_weight);
}

}  // namespace fdkp
