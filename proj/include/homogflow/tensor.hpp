#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace homogflow {

/// Symmetric d x d tensor in packed storage. Only the planar case is
/// implemented; other dimensions fail at compile time.
template <int Dim>
struct SymTensor {
  static_assert(Dim == 2, "only d = 2 is implemented");
};

template <int Dim>
struct Vec {
  static_assert(Dim == 2, "only d = 2 is implemented");
};

template <>
struct Vec<2> {
  double x = 0.0;
  double y = 0.0;

  Vec() = default;
  Vec(double x_, double y_) : x(x_), y(y_) {}

  Vec operator+(const Vec& o) const { return {x + o.x, y + o.y}; }
  Vec operator-(const Vec& o) const { return {x - o.x, y - o.y}; }
  Vec operator*(double s) const { return {x * s, y * s}; }
  Vec& operator+=(const Vec& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
};

using Vec2 = Vec<2>;

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// Packed symmetric 2x2 tensor (xx, yy, xy). Contractions and norms count
/// the off-diagonal entry twice, so |xi|^2 entering the constitutive law is
/// the genuine Frobenius square.
template <>
struct SymTensor<2> {
  double xx = 0.0;
  double yy = 0.0;
  double xy = 0.0;

  SymTensor() = default;
  SymTensor(double xx_, double yy_, double xy_) : xx(xx_), yy(yy_), xy(xy_) {}

  static SymTensor identity() { return {1.0, 1.0, 0.0}; }

  SymTensor operator+(const SymTensor& o) const {
    return {xx + o.xx, yy + o.yy, xy + o.xy};
  }
  SymTensor operator-(const SymTensor& o) const {
    return {xx - o.xx, yy - o.yy, xy - o.xy};
  }
  SymTensor operator*(double s) const { return {xx * s, yy * s, xy * s}; }
  SymTensor& operator+=(const SymTensor& o) {
    xx += o.xx;
    yy += o.yy;
    xy += o.xy;
    return *this;
  }
  SymTensor& operator-=(const SymTensor& o) {
    xx -= o.xx;
    yy -= o.yy;
    xy -= o.xy;
    return *this;
  }
  SymTensor operator-() const { return {-xx, -yy, -xy}; }

  double trace() const { return xx + yy; }

  /// Frobenius double contraction; off-diagonals counted twice.
  double ddot(const SymTensor& o) const {
    return xx * o.xx + yy * o.yy + 2.0 * xy * o.xy;
  }

  double norm2() const { return ddot(*this); }
  double norm() const { return std::sqrt(norm2()); }

  Vec2 apply(const Vec2& v) const {
    return {xx * v.x + xy * v.y, xy * v.x + yy * v.y};
  }
};

using SymTensor2 = SymTensor<2>;

inline SymTensor2 operator*(double s, const SymTensor2& t) { return t * s; }

/// Symmetric part (M + M^T)/2 of a full 2x2 matrix given row-major.
inline SymTensor2 sym(const std::array<std::array<double, 2>, 2>& m) {
  return {m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0])};
}

inline double ddot(const SymTensor2& a, const SymTensor2& b) {
  return a.ddot(b);
}

/// u (x) u, the symmetric rank-one tensor u_i u_j.
inline SymTensor2 outer(const Vec2& u) {
  return {u.x * u.x, u.y * u.y, u.x * u.y};
}

/// Full-matrix reconstruction, mostly for tests.
inline std::array<std::array<double, 2>, 2> to_matrix(const SymTensor2& t) {
  return {{{t.xx, t.xy}, {t.xy, t.yy}}};
}

}  // namespace homogflow
