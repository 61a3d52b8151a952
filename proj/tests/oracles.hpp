// Test-only reference implementations, deliberately independent of the
// production solvers they check.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

/// One-dimensional reduction of the laminate cell problem for a pure shear
/// load xi_xy = t: the corrector is a shear profile v(y1) with zero mean and
/// the shear stress alpha(y1) (delta + 2 w^2)^{(p-2)/2} w, w = t + v, must be
/// the same constant C across layers. Returns C = effective shear response.
/// Solved by nested bisection, nothing shared with the spectral solver.
struct Laminate1D {
  double p;
  double delta;
  std::function<double(double)> alpha;  // coefficient as a function of y1
  int samples = 1 << 14;                // quadrature resolution
  double offset = 0.5;  // 0.5: midpoint rule; 0: match left-sampled grids

  double flux(double a, double w) const {
    return a * std::pow(delta + 2.0 * w * w, 0.5 * (p - 2.0)) * w;
  }

  double invert_flux(double a, double c) const {
    if (c == 0.0) return 0.0;
    const double sign = c > 0.0 ? 1.0 : -1.0;
    const double target = std::abs(c);
    double lo = 0.0, hi = 1.0;
    while (flux(a, hi) < target) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (flux(a, mid) < target ? lo : hi) = mid;
    }
    return sign * 0.5 * (lo + hi);
  }

  double mean_w(double c) const {
    double s = 0.0;
    for (int i = 0; i < samples; ++i) {
      const double y = (i + offset) / samples;
      s += invert_flux(alpha(y), c);
    }
    return s / samples;
  }

  /// Effective shear stress for load t (>0).
  double effective_shear(double t) const {
    if (t <= 0.0) throw std::invalid_argument("laminate oracle: t > 0");
    double lo = 0.0, hi = 1.0;
    while (mean_w(hi) < t) hi *= 2.0;
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (mean_w(mid) < t ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

  /// Corrector profile v(y1) = w - t at given sample points.
  std::vector<double> corrector_profile(double t,
                                        const std::vector<double>& y1) const {
    const double c = effective_shear(t);
    std::vector<double> v;
    v.reserve(y1.size());
    for (double y : y1) v.push_back(invert_flux(alpha(y), c) - t);
    return v;
  }
};

/// Closed form for the p = 2 two-phase half/half laminate: the effective
/// shear modulus is the harmonic mean of the phase moduli.
inline double laminate_p2_harmonic_mean(double a1, double a2) {
  return 2.0 / (1.0 / a1 + 1.0 / a2);
}

}  // namespace oracles
