#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "homogflow/fft.hpp"
#include "homogflow/tensor.hpp"

namespace homogflow {

// Uniform grids on the unit cell Y = (0,1]^2 (periodic, n samples per side
// at i*h) and on the closed unit square (nodal, n+1 points per side with the
// walls on grid nodes). h = 1/n in both cases.

struct PeriodicGrid {
  int n = 0;
  explicit PeriodicGrid(int n_) : n(n_) {
    if (n < 8) throw std::invalid_argument("PeriodicGrid: n must be >= 8");
    if (!is_power_of_two(n))
      throw std::invalid_argument("PeriodicGrid: n must be a power of two");
  }
  double h() const { return 1.0 / n; }
  int pts() const { return n; }
};

struct DomainGrid {
  int n = 0;
  explicit DomainGrid(int n_) : n(n_) {
    if (n < 8) throw std::invalid_argument("DomainGrid: n must be >= 8");
  }
  double h() const { return 1.0 / n; }
  int pts() const { return n + 1; }
  bool on_boundary(int i, int j) const {
    return i == 0 || j == 0 || i == n || j == n;
  }
};

enum class Bc { periodic, dirichlet0 };

namespace detail {
template <class T>
struct FieldTraits;
template <>
struct FieldTraits<double> {
  static constexpr int components = 1;
  static double magnitude(double v) { return std::abs(v); }
};
template <>
struct FieldTraits<Vec2> {
  static constexpr int components = 2;
  static double magnitude(const Vec2& v) { return v.norm(); }
};
template <>
struct FieldTraits<SymTensor2> {
  static constexpr int components = 3;
  static double magnitude(const SymTensor2& v) { return v.norm(); }
};
}  // namespace detail

/// Field of values T on an n-per-side grid. `pts` points per side, row-major
/// with x fastest: index = iy*pts + ix. Periodic fields sample Y at i*h,
/// i = 0..n-1; domain fields are nodal including the walls (pts = n+1).
template <class T>
struct GridField {
  int n = 0;
  bool periodic = false;
  std::vector<T> v;

  GridField() = default;
  GridField(const PeriodicGrid& g) : n(g.n), periodic(true), v(size_t(g.n) * g.n) {}
  GridField(const DomainGrid& g)
      : n(g.n), periodic(false), v(size_t(g.n + 1) * (g.n + 1)) {}

  int pts() const { return periodic ? n : n + 1; }
  double h() const { return 1.0 / n; }
  size_t size() const { return v.size(); }

  T& at(int ix, int iy) { return v[size_t(iy) * pts() + ix]; }
  const T& at(int ix, int iy) const { return v[size_t(iy) * pts() + ix]; }

  /// Value with the grid's boundary convention: wrap for periodic fields,
  /// zero extension outside the square for domain fields.
  T value(int ix, int iy) const {
    const int m = pts();
    if (periodic) {
      ix %= n;
      if (ix < 0) ix += n;
      iy %= n;
      if (iy < 0) iy += n;
      return at(ix, iy);
    }
    if (ix < 0 || iy < 0 || ix >= m || iy >= m) return T{};
    return at(ix, iy);
  }

  double coord(int i) const { return i * h(); }

  bool same_layout(const GridField& o) const {
    return n == o.n && periodic == o.periodic;
  }
};

template <class T, class G, class F>
GridField<T> field_from(const G& grid, F&& f) {
  GridField<T> out(grid);
  const int m = out.pts();
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix)
      out.at(ix, iy) = f(out.coord(ix), out.coord(iy));
  return out;
}

/// Symmetric part of the velocity gradient by centered second-order
/// differences. Periodic wrap, or zero ghost values outside the square.
inline GridField<SymTensor2> sym_gradient(const GridField<Vec2>& u) {
  GridField<SymTensor2> out;
  out.n = u.n;
  out.periodic = u.periodic;
  out.v.resize(u.size());
  const int m = u.pts();
  const double ih2 = 1.0 / (2.0 * u.h());
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      const Vec2 xp = u.value(ix + 1, iy), xm = u.value(ix - 1, iy);
      const Vec2 yp = u.value(ix, iy + 1), ym = u.value(ix, iy - 1);
      const double dxux = (xp.x - xm.x) * ih2, dxuy = (xp.y - xm.y) * ih2;
      const double dyux = (yp.x - ym.x) * ih2, dyuy = (yp.y - ym.y) * ih2;
      out.at(ix, iy) = {dxux, dyuy, 0.5 * (dxuy + dyux)};
    }
  return out;
}

/// Divergence of a vector field (centered differences, same conventions).
inline GridField<double> divergence(const GridField<Vec2>& u) {
  GridField<double> out;
  out.n = u.n;
  out.periodic = u.periodic;
  out.v.resize(u.size());
  const int m = u.pts();
  const double ih2 = 1.0 / (2.0 * u.h());
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix)
      out.at(ix, iy) = (u.value(ix + 1, iy).x - u.value(ix - 1, iy).x) * ih2 +
                       (u.value(ix, iy + 1).y - u.value(ix, iy - 1).y) * ih2;
  return out;
}

/// Row-wise divergence of a symmetric tensor field, (div T)_i = d_j T_ij.
inline GridField<Vec2> divergence(const GridField<SymTensor2>& t) {
  GridField<Vec2> out;
  out.n = t.n;
  out.periodic = t.periodic;
  out.v.resize(t.size());
  const int m = t.pts();
  const double ih2 = 1.0 / (2.0 * t.h());
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      const SymTensor2 xp = t.value(ix + 1, iy), xm = t.value(ix - 1, iy);
      const SymTensor2 yp = t.value(ix, iy + 1), ym = t.value(ix, iy - 1);
      out.at(ix, iy) = {(xp.xx - xm.xx) * ih2 + (yp.xy - ym.xy) * ih2,
                        (xp.xy - xm.xy) * ih2 + (yp.yy - ym.yy) * ih2};
    }
  return out;
}

/// Quadrature weight of node (ix,iy): h^2 on the torus, trapezoidal on the
/// square (so that the constant 1 integrates to exactly 1 on both grids).
template <class T>
double quad_weight(const GridField<T>& f, int ix, int iy) {
  const double h2 = f.h() * f.h();
  if (f.periodic) return h2;
  double w = h2;
  if (ix == 0 || ix == f.n) w *= 0.5;
  if (iy == 0 || iy == f.n) w *= 0.5;
  return w;
}

inline double integrate(const GridField<double>& f) {
  double s = 0.0;
  const int m = f.pts();
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) s += quad_weight(f, ix, iy) * f.at(ix, iy);
  return s;
}

template <class T>
T mean_value(const GridField<T>& f) {
  T s{};
  const int m = f.pts();
  double wtot = 0.0;
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      const double w = quad_weight(f, ix, iy);
      s += f.at(ix, iy) * w;
      wtot += w;
    }
  return s * (1.0 / wtot);
}

/// L^p norm with the pointwise Frobenius magnitude for tensor kinds.
/// p = infinity is the max-abs norm.
template <class T>
double lp_norm(const GridField<T>& f, double p) {
  using Tr = detail::FieldTraits<T>;
  const int m = f.pts();
  if (std::isinf(p)) {
    double mx = 0.0;
    for (const T& x : f.v) mx = std::max(mx, Tr::magnitude(x));
    return mx;
  }
  if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
  double s = 0.0;
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix)
      s += quad_weight(f, ix, iy) * std::pow(Tr::magnitude(f.at(ix, iy)), p);
  return std::pow(s, 1.0 / p);
}

template <class T>
double dot_l2(const GridField<T>& a, const GridField<T>& b) {
  double s = 0.0;
  const int m = a.pts();
  for (int iy = 0; iy < m; ++iy)
    for (int ix = 0; ix < m; ++ix) {
      if constexpr (std::is_same_v<T, double>)
        s += quad_weight(a, ix, iy) * a.at(ix, iy) * b.at(ix, iy);
      else if constexpr (std::is_same_v<T, Vec2>)
        s += quad_weight(a, ix, iy) * a.at(ix, iy).dot(b.at(ix, iy));
      else
        s += quad_weight(a, ix, iy) * a.at(ix, iy).ddot(b.at(ix, iy));
    }
  return s;
}

// ---------------------------------------------------------------------------
// Spectral transform contract on the periodic grid (power of two enforced).
// One complex coefficient array per field component, standard DFT layout.

template <class T>
std::vector<std::vector<std::complex<double>>> spectral_forward(
    const GridField<T>& f) {
  if (!f.periodic || !is_power_of_two(f.n))
    throw std::invalid_argument(
        "spectral_forward: periodic power-of-two grid required");
  using Tr = detail::FieldTraits<T>;
  const int n = f.n;
  std::vector<std::vector<std::complex<double>>> out(Tr::components);
  for (int c = 0; c < Tr::components; ++c) {
    out[c].resize(size_t(n) * n);
    for (size_t k = 0; k < f.v.size(); ++k) {
      const double* comp = reinterpret_cast<const double*>(&f.v[k]);
      out[c][k] = comp[c];
    }
    FftEngine::instance().dft2(n, n, out[c].data(), -1);
  }
  return out;
}

template <class T>
GridField<T> spectral_inverse(const PeriodicGrid& g,
                              std::vector<std::vector<std::complex<double>>> coef) {
  using Tr = detail::FieldTraits<T>;
  if (static_cast<int>(coef.size()) != Tr::components)
    throw std::invalid_argument("spectral_inverse: component count mismatch");
  const int n = g.n;
  GridField<T> out(g);
  const double scale = 1.0 / (double(n) * n);
  for (int c = 0; c < Tr::components; ++c) {
    FftEngine::instance().dft2(n, n, coef[c].data(), +1);
    for (size_t k = 0; k < out.v.size(); ++k) {
      double* comp = reinterpret_cast<double*>(&out.v[k]);
      comp[c] = coef[c][k].real() * scale;
    }
  }
  return out;
}

}  // namespace homogflow
