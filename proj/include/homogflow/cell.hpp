#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "homogflow/fft.hpp"
#include "homogflow/grid.hpp"
#include "homogflow/law.hpp"

namespace homogflow {

/// L^2-orthogonal projection onto G(Y), the symmetric gradients of
/// divergence-free Y-periodic fields. Per nonzero frequency k the target
/// space is spanned by sym(k (x) k_perp); the mean mode is annihilated.
inline GridField<SymTensor2> project_G(const GridField<SymTensor2>& t) {
  if (!t.periodic)
    throw std::invalid_argument("project_G: periodic field required");
  const int n = t.n;
  const size_t nn = size_t(n) * n;
  std::vector<std::complex<double>> cxx(nn), cyy(nn), cxy(nn);
  for (size_t k = 0; k < nn; ++k) {
    cxx[k] = t.v[k].xx;
    cyy[k] = t.v[k].yy;
    cxy[k] = t.v[k].xy;
  }
  auto& fft = FftEngine::instance();
  fft.dft2(n, n, cxx.data(), -1);
  fft.dft2(n, n, cyy.data(), -1);
  fft.dft2(n, n, cxy.data(), -1);

  for (int iy = 0; iy < n; ++iy) {
    const double k2 = dft_freq(iy, n);
    for (int ix = 0; ix < n; ++ix) {
      const double k1 = dft_freq(ix, n);
      const size_t idx = size_t(iy) * n + ix;
      const double kk = k1 * k1 + k2 * k2;
      // The mean mode is orthogonal to G(Y). Nyquist rows carry no reality-
      // consistent derivative, so the discrete G(Y) is band limited; zeroing
      // them keeps the operator an exact orthogonal projector on real fields.
      if (kk == 0.0 || ix == n / 2 || iy == n / 2) {
        cxx[idx] = cyy[idx] = cxy[idx] = 0.0;
        continue;
      }
      // basis tensor sym(k (x) k_perp) = (-k1 k2, k1 k2, (k1^2 - k2^2)/2),
      // Frobenius norm (off-diagonal doubled) equals kk / sqrt(2)
      const double bxx = -k1 * k2, byy = k1 * k2, bxy = 0.5 * (k1 * k1 - k2 * k2);
      const double inv_norm2 = 2.0 / (kk * kk);
      const std::complex<double> coef =
          (cxx[idx] * bxx + cyy[idx] * byy + 2.0 * cxy[idx] * bxy) * inv_norm2;
      cxx[idx] = coef * bxx;
      cyy[idx] = coef * byy;
      cxy[idx] = coef * bxy;
    }
  }

  fft.dft2(n, n, cxx.data(), +1);
  fft.dft2(n, n, cyy.data(), +1);
  fft.dft2(n, n, cxy.data(), +1);
  GridField<SymTensor2> out;
  out.n = n;
  out.periodic = true;
  out.v.resize(nn);
  const double scale = 1.0 / double(nn);
  for (size_t k = 0; k < nn; ++k)
    out.v[k] = {cxx[k].real() * scale, cyy[k].real() * scale,
                cxy[k].real() * scale};
  return out;
}

struct CellSolveOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  double rho = 0.9;          // damping for the non-potential fixed point
  double armijo = 1e-4;
  double backtrack = 0.5;
  /// Called after every accepted iterate with (iter, energy, residual, V).
  std::function<void(int, double, double, const GridField<SymTensor2>&)>
      observer;
};

struct CellSolution {
  SymTensor2 xi;
  GridField<SymTensor2> V;
  int iterations = 0;
  double residual = 0.0;
  std::optional<double> energy;  // final objective, potential laws only
  bool converged = false;
};

namespace detail {

inline GridField<SymTensor2> stress_field(const StressLaw& law,
                                          const SymTensor2& xi,
                                          const GridField<SymTensor2>& V) {
  GridField<SymTensor2> s;
  s.n = V.n;
  s.periodic = true;
  s.v.resize(V.size());
  const int n = V.n;
  const double h = 1.0 / n;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      s.at(ix, iy) = law.stress({ix * h, iy * h}, xi + V.at(ix, iy));
  return s;
}

inline double cell_energy(const StressLaw& law, const SymTensor2& xi,
                          const GridField<SymTensor2>& V) {
  double e = 0.0;
  const int n = V.n;
  const double h = 1.0 / n;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix)
      e += law.potential({ix * h, iy * h}, xi + V.at(ix, iy));
  return e / (double(n) * n);
}

/// Sampled upper bound for the local Lipschitz modulus of xi -> S(y, xi)
/// on the ball |zeta| <= radius. Deterministic (fixed probe seed).
inline double lipschitz_modulus_bound(const StressLaw& law, double radius) {
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> u(-radius / std::sqrt(3.0),
                                           radius / std::sqrt(3.0));
  std::uniform_real_distribution<double> uy(0.0, 1.0);
  double mu = 0.0;
  for (int k = 0; k < 256; ++k) {
    const Vec2 y{uy(rng), uy(rng)};
    SymTensor2 a{u(rng), u(rng), u(rng)};
    SymTensor2 b{u(rng), u(rng), u(rng)};
    if ((a - b).norm() < 1e-10) continue;
    const double slope =
        (law.stress(y, a) - law.stress(y, b)).norm() / (a - b).norm();
    mu = std::max(mu, slope);
  }
  return 1.5 * std::max(mu, 1e-12);
}

}  // namespace detail

/// Residual of the cell problem weak form: the projected stress must vanish
/// against every discrete W in G(Y).
inline double orthogonality_residual(const StressLaw& law, const SymTensor2& xi,
                                     const GridField<SymTensor2>& V) {
  auto s = detail::stress_field(law, xi, V);
  auto g = project_G(s);
  return lp_norm(g, 2.0) / std::max(1.0, lp_norm(s, 2.0));
}

/// Solve the periodic cell problem for the corrector V in G(Y) at fixed
/// macroscopic strain xi. Potential laws: projected gradient descent with a
/// Barzilai-Borwein step safeguarded by Armijo backtracking (the objective
/// never increases on accepted steps). Non-potential laws: damped fixed
/// point V <- V - rho * project_G(S / mu_ref).
inline CellSolution solve_cell(const StressLaw& law, const SymTensor2& xi,
                               const PeriodicGrid& grid,
                               const CellSolveOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw std::invalid_argument("solve_cell: tol > 0");
  CellSolution sol;
  sol.xi = xi;
  sol.V = GridField<SymTensor2>(grid);

  const double radius = 2.0 * (1.0 + xi.norm());
  const double mu_max = detail::lipschitz_modulus_bound(law, radius);
  const bool with_potential = law.has_potential();

  auto s = detail::stress_field(law, xi, sol.V);
  auto g = project_G(s);
  double snorm = lp_norm(s, 2.0);
  double gnorm = lp_norm(g, 2.0);
  double energy = with_potential ? detail::cell_energy(law, xi, sol.V) : 0.0;

  double rho = with_potential ? 1.0 / mu_max : opt.rho / mu_max;
  GridField<SymTensor2> prev_g;
  double prev_rho = rho;

  for (int it = 0; it < opt.max_iter; ++it) {
    sol.residual = gnorm / std::max(1.0, snorm);
    sol.iterations = it;
    if (opt.observer)
      opt.observer(it, with_potential ? energy : 0.0, sol.residual, sol.V);
    if (sol.residual <= opt.tol) {
      sol.converged = true;
      break;
    }

    if (with_potential) {
      double step = rho;
      GridField<SymTensor2> cand;
      double cand_energy = energy;
      const double g2 = gnorm * gnorm;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        // once the predicted decrease drops below roundoff resolution the
        // energy cannot certify descent; polish with the safe 1/mu step
        if (opt.armijo * step * g2 <= 1e-14 * (1.0 + std::abs(energy))) break;
        cand = sol.V;
        for (size_t k = 0; k < cand.v.size(); ++k) cand.v[k] -= g.v[k] * step;
        cand = project_G(cand);
        cand_energy = detail::cell_energy(law, xi, cand);
        if (cand_energy <= energy - opt.armijo * step * g2) {
          accepted = true;
          break;
        }
        step *= opt.backtrack;
      }
      if (!accepted) {
        step = 1.0 / mu_max;
        cand = sol.V;
        for (size_t k = 0; k < cand.v.size(); ++k) cand.v[k] -= g.v[k] * step;
        cand = project_G(cand);
        cand_energy = detail::cell_energy(law, xi, cand);
      }
      auto new_s = detail::stress_field(law, xi, cand);
      auto new_g = project_G(new_s);
      // BB1 step from the accepted move
      double num = 0.0, den = 0.0;
      for (size_t k = 0; k < cand.v.size(); ++k) {
        const SymTensor2 dv = cand.v[k] - sol.V.v[k];
        const SymTensor2 dg = new_g.v[k] - g.v[k];
        num += dv.ddot(dv);
        den += dv.ddot(dg);
      }
      prev_rho = step;
      rho = (den > 0.0) ? std::clamp(num / den, 0.05 / mu_max, 50.0 / mu_max)
                        : prev_rho * 2.0;
      sol.V = std::move(cand);
      s = std::move(new_s);
      g = std::move(new_g);
      energy = cand_energy;
      snorm = lp_norm(s, 2.0);
      gnorm = lp_norm(g, 2.0);
    } else {
      for (size_t k = 0; k < sol.V.v.size(); ++k) sol.V.v[k] -= g.v[k] * rho;
      sol.V = project_G(sol.V);
      s = detail::stress_field(law, xi, sol.V);
      g = project_G(s);
      snorm = lp_norm(s, 2.0);
      gnorm = lp_norm(g, 2.0);
    }
  }
  if (!sol.converged) {
    sol.residual = gnorm / std::max(1.0, snorm);
    sol.converged = sol.residual <= opt.tol;
  }
  if (with_potential) sol.energy = energy;
  return sol;
}

/// Effective stress: cell average of S(., xi + V) at the converged corrector.
inline SymTensor2 effective_stress(const StressLaw& law, const SymTensor2& xi,
                                   const PeriodicGrid& grid,
                                   const CellSolveOptions& opt = {}) {
  CellSolution sol = solve_cell(law, xi, grid, opt);
  if (!sol.converged)
    throw std::runtime_error("effective_stress: cell solve did not converge");
  auto s = detail::stress_field(law, xi, sol.V);
  return mean_value(s);
}

}  // namespace homogflow
