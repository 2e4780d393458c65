#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fdkp/error.hpp"

namespace fdkp {

using cplx = std::complex<double>;

// Real multiplier sampled on the half lattice of a grid (same layout as Spectrum).
using Multiplier = std::vector<double>;

namespace detail {

struct FftPlans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Plans are created once per shape and kept for the life of the process.
// FFTW_ESTIMATE keeps planning deterministic, so repeated runs are bit identical.
inline std::shared_ptr<const FftPlans> plans_for(std::size_t nx, std::size_t ny) {
  static auto* cache = new std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const FftPlans>>();
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  auto key = std::make_pair(nx, ny);
  if (auto it = cache->find(key); it != cache->end()) return it->second;
  const std::size_t nkx = nx / 2 + 1;
  double* r = fftw_alloc_real(nx * ny);
  fftw_complex* c = fftw_alloc_complex(nkx * ny);
  auto plans = std::make_shared<FftPlans>();
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  plans->r2c = fftw_plan_dft_r2c_2d(static_cast<int>(ny), static_cast<int>(nx), r, c, flags);
  plans->c2r = fftw_plan_dft_c2r_2d(static_cast<int>(ny), static_cast<int>(nx), c, r, flags);
  fftw_free(r);
  fftw_free(c);
  if (!plans->r2c || !plans->c2r) throw InvalidArgument("fftw planning failed");
  (*cache)[key] = plans;
  return plans;
}

}  // namespace detail

// Periodic box [-lx/2, lx/2) x [-ly/2, ly/2) with nx x ny samples.
// Sample (i, j) sits at x = (i - nx/2) dx, y = (j - ny/2) dy; storage is row-major, x fastest.
// The spectral side is the r2c half lattice: ny rows of nx/2+1 nonnegative k1 columns.
class Grid2D {
 public:
  Grid2D(std::size_t nx, std::size_t ny, double lx, double ly) : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
    if (nx < 8 || ny < 8 || nx % 2 != 0 || ny % 2 != 0)
      throw InvalidArgument("grid sizes must be even and at least 8 (got " + std::to_string(nx) + "x" +
                            std::to_string(ny) + ")");
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
      throw InvalidArgument("grid lengths must be positive and finite");
    plans_ = detail::plans_for(nx, ny);
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double dx() const { return lx_ / static_cast<double>(nx_); }
  double dy() const { return ly_ / static_cast<double>(ny_); }
  double cell_area() const { return dx() * dy(); }
  std::size_t size() const { return nx_ * ny_; }
  std::size_t nkx() const { return nx_ / 2 + 1; }
  std::size_t spectral_size() const { return nkx() * ny_; }
  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  std::size_t spectral_index(std::size_t i, std::size_t j) const { return j * nkx() + i; }

  double x(std::size_t i) const { return (static_cast<double>(i) - static_cast<double>(nx_ / 2)) * dx(); }
  double y(std::size_t j) const { return (static_cast<double>(j) - static_cast<double>(ny_ / 2)) * dy(); }

  // Signed mode numbers. The Nyquist row j = ny/2 is taken as negative.
  static long signed_mode(std::size_t j, std::size_t n) {
    return j < n / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
  }
  double k1(std::size_t i) const { return 2.0 * std::numbers::pi * static_cast<double>(i) / lx_; }
  double k2(std::size_t j) const { return 2.0 * std::numbers::pi * static_cast<double>(signed_mode(j, ny_)) / ly_; }

  // Number of full-lattice modes represented by half-lattice column i.
  double multiplicity(std::size_t i) const { return (i == 0 || i == nx_ / 2) ? 1.0 : 2.0; }

  Grid2D with_lengths(double lx, double ly) const { return Grid2D(nx_, ny_, lx, ly); }

  bool operator==(const Grid2D& o) const {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
    return nx_ == o.nx_ && ny_ == o.ny_ && close(lx_, o.lx_) && close(ly_, o.ly_);
  }
  bool operator!=(const Grid2D& o) const { return !(*this == o); }

  std::string describe() const {
    return std::to_string(nx_) + "x" + std::to_string(ny_) + " [" + std::to_string(lx_) + " x " +
           std::to_string(ly_) + "]";
  }

  // Raw unnormalized transforms. c2r overwrites its input.
  void raw_r2c(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(plans_->r2c, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  }
  void raw_c2r(cplx* in, double* out) const {
    fftw_execute_dft_c2r(plans_->c2r, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  std::size_t nx_, ny_;
  double lx_, ly_;
  std::shared_ptr<const detail::FftPlans> plans_;
};

inline void require_same_grid(const Grid2D& a, const Grid2D& b, const char* what) {
  if (a != b) throw InvalidArgument(std::string(what) + ": grid mismatch (" + a.describe() + " vs " + b.describe() + ")");
}

// Fourier coefficients normalized so that sum over the full lattice of |c|^2 equals the
// integral of u^2 over the box: c = sqrt(dx dy / (nx ny)) * DFT(u).
class Spectrum {
 public:
  explicit Spectrum(const Grid2D& g) : grid_(g), c_(g.spectral_size(), cplx(0.0, 0.0)) {}
  Spectrum(const Grid2D& g, std::vector<cplx> c) : grid_(g), c_(std::move(c)) {
    if (c_.size() != grid_.spectral_size()) throw InvalidArgument("spectrum size does not match grid");
  }

  const Grid2D& grid() const { return grid_; }
  std::vector<cplx>& data() { return c_; }
  const std::vector<cplx>& data() const { return c_; }
  cplx& operator()(std::size_t i, std::size_t j) { return c_[grid_.spectral_index(i, j)]; }
  const cplx& operator()(std::size_t i, std::size_t j) const { return c_[grid_.spectral_index(i, j)]; }

  Spectrum& operator+=(const Spectrum& o) {
    require_same_grid(grid_, o.grid_, "spectrum +=");
    for (std::size_t q = 0; q < c_.size(); ++q) c_[q] += o.c_[q];
    return *this;
  }
  Spectrum& operator-=(const Spectrum& o) {
    require_same_grid(grid_, o.grid_, "spectrum -=");
    for (std::size_t q = 0; q < c_.size(); ++q) c_[q] -= o.c_[q];
    return *this;
  }
  Spectrum& operator*=(double a) {
    for (auto& v : c_) v *= a;
    return *this;
  }
  Spectrum& operator*=(const Multiplier& m) {
    if (m.size() != c_.size()) throw InvalidArgument("multiplier size does not match spectrum");
    for (std::size_t q = 0; q < c_.size(); ++q) c_[q] *= m[q];
    return *this;
  }
  // this += a * o
  Spectrum& axpy(double a, const Spectrum& o) {
    require_same_grid(grid_, o.grid_, "spectrum axpy");
    for (std::size_t q = 0; q < c_.size(); ++q) c_[q] += a * o.c_[q];
    return *this;
  }

 private:
  Grid2D grid_;
  std::vector<cplx> c_;
};

inline Spectrum operator+(Spectrum a, const Spectrum& b) { return a += b; }
inline Spectrum operator-(Spectrum a, const Spectrum& b) { return a -= b; }
inline Spectrum operator*(double s, Spectrum a) { return a *= s; }
inline Spectrum operator*(const Multiplier& m, Spectrum a) { return a *= m; }

// L2 inner product from coefficients (Parseval over the full lattice).
inline double inner_l2(const Spectrum& a, const Spectrum& b) {
  require_same_grid(a.grid(), b.grid(), "inner_l2");
  const Grid2D& g = a.grid();
  double s = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nkx(); ++i) {
      const std::size_t q = g.spectral_index(i, j);
      s += g.multiplicity(i) * (a.data()[q].real() * b.data()[q].real() + a.data()[q].imag() * b.data()[q].imag());
    }
  return s;
}

// Weighted quadratic form sum w |c|^2 over the full lattice.
inline double weighted_energy(const Spectrum& a, const Multiplier& w) {
  const Grid2D& g = a.grid();
  if (w.size() != g.spectral_size()) throw InvalidArgument("weight size does not match spectrum");
  double s = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nkx(); ++i) {
      const std::size_t q = g.spectral_index(i, j);
      s += g.multiplicity(i) * w[q] * std::norm(a.data()[q]);
    }
  return s;
}

// Restore conjugate symmetry on the self-conjugate columns (k1 = 0 and Nyquist) so a
// half-lattice array is the transform of some real field.
inline void make_hermitian(Spectrum& s) {
  const Grid2D& g = s.grid();
  const std::size_t ny = g.ny();
  for (std::size_t i : {std::size_t{0}, g.nx() / 2}) {
    for (std::size_t j = 0; j <= ny / 2; ++j) {
      const std::size_t jm = (ny - j) % ny;
      const cplx a = s(i, j), b = s(i, jm);
      if (j == jm) {
        s(i, j) = cplx(a.real(), 0.0);
      } else {
        const cplx avg = 0.5 * (a + std::conj(b));
        s(i, j) = avg;
        s(i, jm) = std::conj(avg);
      }
    }
  }
}

class Field;
Spectrum forward_transform(const Field& f);

// Real samples on a grid, optionally carrying the exact spectrum they were built from.
class Field {
 public:
  explicit Field(const Grid2D& g) : grid_(g), values_(g.size(), 0.0) {}
  Field(const Grid2D& g, std::vector<double> v) : grid_(g), values_(std::move(v)) {
    if (values_.size() != grid_.size()) throw InvalidArgument("field size does not match grid");
  }

  // Synthesizes samples from coefficients and keeps the coefficients as the spectral cache.
  static Field from_spectrum(Spectrum s) {
    make_hermitian(s);
    const Grid2D& g = s.grid();
    std::vector<cplx> work = s.data();
    std::vector<double> v(g.size());
    g.raw_c2r(work.data(), v.data());
    const double scale = 1.0 / std::sqrt(g.lx() * g.ly());
    for (auto& x : v) x *= scale;
    Field f(g, std::move(v));
    f.spectrum_ = std::make_shared<const Spectrum>(std::move(s));
    return f;
  }

  // Pairs samples with coefficients the caller already knows to match them.
  static Field from_parts(std::vector<double> values, Spectrum s) {
    Field f(s.grid(), std::move(values));
    f.spectrum_ = std::make_shared<const Spectrum>(std::move(s));
    return f;
  }

  const Grid2D& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  // Mutable access drops the spectral cache.
  std::vector<double>& mutable_values() {
    spectrum_.reset();
    return values_;
  }
  double operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }
  void set(std::size_t i, std::size_t j, double v) {
    spectrum_.reset();
    values_[grid_.index(i, j)] = v;
  }

  const Spectrum* cached_spectrum() const { return spectrum_.get(); }
  void cache_spectrum() {
    if (!spectrum_) spectrum_ = std::make_shared<const Spectrum>(forward_transform(*this));
  }

  Field& operator*=(double a) {
    for (auto& v : values_) v *= a;
    if (spectrum_) spectrum_ = std::make_shared<const Spectrum>(a * Spectrum(*spectrum_));
    return *this;
  }
  Field& operator+=(const Field& o) { return axpy(1.0, o); }
  Field& operator-=(const Field& o) { return axpy(-1.0, o); }
  // this += a * o; the cache survives only if both operands carry one.
  Field& axpy(double a, const Field& o) {
    require_same_grid(grid_, o.grid_, "field axpy");
    for (std::size_t q = 0; q < values_.size(); ++q) values_[q] += a * o.values_[q];
    if (spectrum_ && o.spectrum_) {
      Spectrum s = *spectrum_;
      s.axpy(a, *o.spectrum_);
      spectrum_ = std::make_shared<const Spectrum>(std::move(s));
    } else {
      spectrum_.reset();
    }
    return *this;
  }

 private:
  Grid2D grid_;
  std::vector<double> values_;
  std::shared_ptr<const Spectrum> spectrum_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }

inline Spectrum forward_transform(const Field& f) {
  if (const Spectrum* s = f.cached_spectrum()) return *s;
  const Grid2D& g = f.grid();
  for (double v : f.values())
    if (!std::isfinite(v)) throw InvalidArgument("forward_transform: non-finite sample");
  Spectrum s(g);
  g.raw_r2c(f.values().data(), s.data().data());
  s *= std::sqrt(g.cell_area() / static_cast<double>(g.size()));
  return s;
}

inline Field inverse_transform(const Spectrum& s) { return Field::from_spectrum(s); }

inline double inner_l2(const Field& a, const Field& b) {
  require_same_grid(a.grid(), b.grid(), "inner_l2");
  double s = 0.0;
  for (std::size_t q = 0; q < a.values().size(); ++q) s += a.values()[q] * b.values()[q];
  return s * a.grid().cell_area();
}

inline double max_abs(const Field& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

// Energy fraction carried by the k1 = 0 column.
inline double xmean_defect(const Spectrum& s) {
  const Grid2D& g = s.grid();
  double zero = 0.0, total = 0.0;
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nkx(); ++i) {
      const double e = g.multiplicity(i) * std::norm(s(i, j));
      total += e;
      if (i == 0) zero += e;
    }
  return total > 0.0 ? std::sqrt(zero / total) : 0.0;
}

inline constexpr double kXmeanTolerance = 1e-10;

inline void require_zero_xmean(const Spectrum& s, const char* what) {
  const double d = xmean_defect(s);
  if (d > kXmeanTolerance)
    throw InvariantViolation(std::string(what) + ": field has k1 = 0 content (relative " + std::to_string(d) + ")");
}

inline Spectrum project_zero_xmean(Spectrum s) {
  for (std::size_t j = 0; j < s.grid().ny(); ++j) s(0, j) = cplx(0.0, 0.0);
  return s;
}

inline Field project_zero_xmean(const Field& f) { return Field::from_spectrum(project_zero_xmean(forward_transform(f))); }

// Periodic roll by (di, dj) samples: out(i + di, j + dj) = in(i, j).
inline Field cyclic_shift(const Field& f, long di, long dj) {
  const Grid2D& g = f.grid();
  const long nx = static_cast<long>(g.nx()), ny = static_cast<long>(g.ny());
  std::vector<double> out(g.size());
  for (long j = 0; j < ny; ++j) {
    const long jt = ((j + dj) % ny + ny) % ny;
    for (long i = 0; i < nx; ++i) {
      const long it = ((i + di) % nx + nx) % nx;
      out[static_cast<std::size_t>(jt * nx + it)] = f.values()[static_cast<std::size_t>(j * nx + i)];
    }
  }
  return Field(g, std::move(out));
}

// Continuous translation by (sx, sy) via spectral phase factors.
inline Field spectral_shift(const Field& f, double sx, double sy) {
  Spectrum s = forward_transform(f);
  const Grid2D& g = s.grid();
  for (std::size_t j = 0; j < g.ny(); ++j)
    for (std::size_t i = 0; i < g.nkx(); ++i) {
      if (i == g.nx() / 2 || j == g.ny() / 2) {
        s(i, j) = cplx(0.0, 0.0);
        continue;
      }
      s(i, j) *= std::polar(1.0, -(g.k1(i) * sx + g.k2(j) * sy));
    }
  return Field::from_spectrum(std::move(s));
}

namespace detail {

inline double ipow(double x, int p) {
  double r = x;
  for (int k = 1; k < p; ++k) r *= x;
  return r;
}

inline std::size_t padded_size(std::size_t n, int p) {
  std::size_t m = (static_cast<std::size_t>(p + 1) * n + 1) / 2;
  if (m % 2) ++m;
  return std::max(m, n);
}

// Copy coefficients between lattices of the same box; modes absent from either side
// (and the Nyquist row/column of the source) are dropped.
inline Spectrum resample_spectrum(const Spectrum& s, const Grid2D& target) {
  const Grid2D& g = s.grid();
  Spectrum out(target);
  const std::size_t ni = std::min(g.nx(), target.nx()) / 2;
  const long half = static_cast<long>(std::min(g.ny(), target.ny()) / 2);
  for (std::size_t j = 0; j < g.ny(); ++j) {
    const long sj = Grid2D::signed_mode(j, g.ny());
    if (sj <= -half || sj >= half) continue;
    const std::size_t jt = sj >= 0 ? static_cast<std::size_t>(sj) : static_cast<std::size_t>(sj + static_cast<long>(target.ny()));
    for (std::size_t i = 0; i < ni; ++i) out(i, jt) = s(i, j);
  }
  return out;
}

}  // namespace detail

// Coefficients of u^p on u's lattice. With dealias the product is formed on a grid padded
// by (p+1)/2 so that the retained modes are free of aliasing.
inline Spectrum power_spectrum(const Field& u, int p, bool dealias) {
  if (p < 1) throw InvalidArgument("power_spectrum: exponent must be positive");
  const Grid2D& g = u.grid();
  if (!dealias) {
    std::vector<double> v(u.values());
    for (auto& x : v) x = detail::ipow(x, p);
    return forward_transform(Field(g, std::move(v)));
  }
  const Grid2D pg(detail::padded_size(g.nx(), p), detail::padded_size(g.ny(), p), g.lx(), g.ly());
  Field up = Field::from_spectrum(detail::resample_spectrum(forward_transform(u), pg));
  std::vector<double> v(up.values());
  for (auto& x : v) x = detail::ipow(x, p);
  return detail::resample_spectrum(forward_transform(Field(pg, std::move(v))), g);
}

// Integral of u^(p+1), consistent with power_spectrum(u, p).
inline double power_integral(const Field& u, int p, bool dealias) {
  if (!dealias) {
    double s = 0.0;
    for (double x : u.values()) s += detail::ipow(x, p + 1);
    return s * u.grid().cell_area();
  }
  return inner_l2(power_spectrum(u, p, true), forward_transform(u));
}

}  // namespace fdkp
