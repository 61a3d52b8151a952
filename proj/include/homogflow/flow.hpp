#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "homogflow/effective.hpp"
#include "homogflow/grid.hpp"
#include "homogflow/law.hpp"

namespace homogflow {

// The stationary flow problems are solved in stream-function form: the
// velocity is u = curl(psi) with psi vanishing on the walls and even ghost
// reflection across them (together these encode no-slip to second order).
// The centered-difference strain operator K = D o curl then has exactly
// zero trace, so the discrete velocity is divergence free to roundoff under
// the collocated centered divergence, and the pressure drops out of the
// Galerkin system. The pressure is recovered afterwards from a Q1 pressure
// Poisson equation solved by cosine transforms.

enum class ClosureKind { micro, homog };

struct FlowProblem {
  DomainGrid grid;
  GridField<SymTensor2> F;  // forcing stress, -div F drives the flow
  ClosureKind closure = ClosureKind::micro;
  std::shared_ptr<const StressLaw> law;      // micro
  double eps = 1.0;                          // micro oscillation period
  const EffectiveTable* table = nullptr;     // homog
  bool convection = false;
  double picard_tol = 1e-7;
  int picard_max = 500;
  double stokes_tol = 1e-9;

  FlowProblem(const DomainGrid& g, GridField<SymTensor2> forcing)
      : grid(g), F(std::move(forcing)) {
    if (!F.same_layout(GridField<SymTensor2>(g)))
      throw std::invalid_argument("FlowProblem: forcing layout mismatch");
  }

  SymTensor2 closure_stress(double x, double y, const SymTensor2& d) const {
    if (closure == ClosureKind::micro) {
      const double y1 = x / eps, y2 = y / eps;
      return law->stress({y1 - std::floor(y1), y2 - std::floor(y2)}, d);
    }
    return interpolate(*table, d);  // domain_error on hull violation
  }

  void validate() const {
    if (closure == ClosureKind::micro) {
      if (!law) throw std::invalid_argument("FlowProblem: law missing");
      if (!(eps > 0.0) || eps > 1.0)
        throw std::invalid_argument("FlowProblem: eps must lie in (0, 1]");
    } else if (!table) {
      throw std::invalid_argument("FlowProblem: effective table missing");
    }
  }
};

struct FlowResiduals {
  double momentum = 0.0;    // relative Galerkin residual
  double divergence = 0.0;  // L2 of the collocated divergence
  double weak_form = 0.0;   // filled by weak_residual
};

struct FlowSolution {
  GridField<Vec2> u;
  GridField<double> pi;
  GridField<double> psi;
  int picard_iters = 0;
  FlowResiduals final_residuals;
  bool converged = false;
};

namespace flowdetail {

inline int reflect(int q, int n) {
  if (q < 0) return -q;
  if (q > n) return 2 * n - q;
  return q;
}

/// u = curl(psi) on the extended index range [-1, n+1]^2 (reflected ghosts).
/// ext has stride n+3 and origin offset 1.
inline void curl_extended(const GridField<double>& psi, std::vector<Vec2>& ext) {
  const int n = psi.n;
  const int stride = n + 3;
  ext.assign(size_t(stride) * stride, Vec2{});
  const double ih2 = 1.0 / (2.0 * psi.h());
  auto ps = [&](int a, int b) {
    return psi.at(reflect(a, n), reflect(b, n));
  };
  for (int b = -1; b <= n + 1; ++b)
    for (int a = -1; a <= n + 1; ++a) {
      ext[size_t(b + 1) * stride + (a + 1)] =
          Vec2{(ps(a, b + 1) - ps(a, b - 1)) * ih2,
               -(ps(a + 1, b) - ps(a - 1, b)) * ih2};
    }
}

/// K psi: symmetric gradient of curl(psi) at every node.
inline GridField<SymTensor2> apply_K(const GridField<double>& psi,
                                     std::vector<Vec2>& scratch) {
  const int n = psi.n;
  curl_extended(psi, scratch);
  const int stride = n + 3;
  auto U = [&](int a, int b) -> const Vec2& {
    return scratch[size_t(b + 1) * stride + (a + 1)];
  };
  GridField<SymTensor2> e;
  e.n = n;
  e.periodic = false;
  e.v.resize(size_t(n + 1) * (n + 1));
  const double ih2 = 1.0 / (2.0 * psi.h());
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const double dxu1 = (U(i + 1, j).x - U(i - 1, j).x) * ih2;
      const double dyu2 = (U(i, j + 1).y - U(i, j - 1).y) * ih2;
      const double dyu1 = (U(i, j + 1).x - U(i, j - 1).x) * ih2;
      const double dxu2 = (U(i + 1, j).y - U(i - 1, j).y) * ih2;
      e.at(i, j) = {dxu1, dyu2, 0.5 * (dyu1 + dxu2)};
    }
  return e;
}

/// Exact adjoint of apply_K with respect to the ddot pairing on tensor
/// fields and the plain dot on psi arrays: <K psi, T> = <psi, K^T T>.
/// Boundary entries of the output are zeroed (they are not degrees of
/// freedom).
inline GridField<double> apply_Kt(const GridField<SymTensor2>& t) {
  const int n = t.n;
  const int stride = n + 3;
  std::vector<Vec2> gu(size_t(stride) * stride, Vec2{});
  const double ih2 = 1.0 / (2.0 * t.h());
  auto GU = [&](int a, int b) -> Vec2& {
    return gu[size_t(b + 1) * stride + (a + 1)];
  };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      const SymTensor2& s = t.at(i, j);
      // Exx = dx u1, Eyy = dy u2, Exy pairing carries the factor 2
      GU(i + 1, j).x += s.xx * ih2;
      GU(i - 1, j).x -= s.xx * ih2;
      GU(i, j + 1).y += s.yy * ih2;
      GU(i, j - 1).y -= s.yy * ih2;
      GU(i, j + 1).x += s.xy * ih2;
      GU(i, j - 1).x -= s.xy * ih2;
      GU(i + 1, j).y += s.xy * ih2;
      GU(i - 1, j).y -= s.xy * ih2;
    }
  GridField<double> g;
  g.n = n;
  g.periodic = false;
  g.v.assign(size_t(n + 1) * (n + 1), 0.0);
  for (int b = -1; b <= n + 1; ++b)
    for (int a = -1; a <= n + 1; ++a) {
      const Vec2& v = GU(a, b);
      if (v.x == 0.0 && v.y == 0.0) continue;
      // curl gather scatters back onto the reflected source nodes
      g.at(reflect(a, n), reflect(b + 1, n)) += v.x * ih2;
      g.at(reflect(a, n), reflect(b - 1, n)) -= v.x * ih2;
      g.at(reflect(a + 1, n), reflect(b, n)) -= v.y * ih2;
      g.at(reflect(a - 1, n), reflect(b, n)) += v.y * ih2;
    }
  for (int i = 0; i <= n; ++i) {
    g.at(i, 0) = g.at(i, n) = 0.0;
    g.at(0, i) = g.at(n, i) = 0.0;
  }
  return g;
}

/// The single K-kernel mode on even grids: the odd-odd sublattice indicator
/// (wide centered differences cannot see it). Removed from every iterate.
inline void remove_kernel_mode(GridField<double>& psi) {
  const int n = psi.n;
  if (n % 2 != 0) return;
  double dot = 0.0;
  int count = 0;
  for (int j = 1; j < n; j += 2)
    for (int i = 1; i < n; i += 2) {
      dot += psi.at(i, j);
      ++count;
    }
  const double c = dot / count;
  for (int j = 1; j < n; j += 2)
    for (int i = 1; i < n; i += 2) psi.at(i, j) -= c;
}

inline double dot_plain(const GridField<double>& a, const GridField<double>& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.v.size(); ++k) s += a.v[k] * b.v[k];
  return s;
}

/// Spectral preconditioner: the clamped-plate operator is approximated per
/// interior sine mode by h^2 (s_k^2 + s_l^2)^2 / 2.
class PsiPreconditioner {
 public:
  PsiPreconditioner(int n, double mu) : n_(n), mu_(mu) {
    const int m = n - 1;
    sym_.resize(m);
    const double h = 1.0 / n;
    for (int k = 1; k <= m; ++k) {
      const double s = std::sin(std::numbers::pi * k * h) / h;
      sym_[k - 1] = s * s;
    }
  }

  GridField<double> apply(const GridField<double>& r) const {
    const int n = n_, m = n - 1;
    std::vector<double> buf(size_t(m) * m);
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i) buf[size_t(j - 1) * m + (i - 1)] = r.at(i, j);
    FftEngine::instance().dst1_2d(m, m, buf.data());
    const double h2 = 1.0 / (double(n) * n);
    const double norm = 1.0 / (4.0 * n * n);  // DST-I double-apply factor
    for (int l = 0; l < m; ++l)
      for (int k = 0; k < m; ++k) {
        const double sig = 0.5 * (sym_[k] + sym_[l]) * (sym_[k] + sym_[l]);
        buf[size_t(l) * m + k] /= mu_ * h2 * sig;
      }
    FftEngine::instance().dst1_2d(m, m, buf.data());
    GridField<double> out;
    out.n = n;
    out.periodic = false;
    out.v.assign(size_t(n + 1) * (n + 1), 0.0);
    for (int j = 1; j < n; ++j)
      for (int i = 1; i < n; ++i)
        out.at(i, j) = buf[size_t(j - 1) * m + (i - 1)] * norm;
    return out;
  }

 private:
  int n_;
  double mu_;
  std::vector<double> sym_;
};

/// A0 = K^T W K, the constant-viscosity Galerkin operator on psi.
inline GridField<double> apply_A0(const GridField<double>& psi,
                                  std::vector<Vec2>& scratch) {
  auto e = apply_K(psi, scratch);
  for (int j = 0; j <= e.n; ++j)
    for (int i = 0; i <= e.n; ++i) e.at(i, j) = e.at(i, j) * quad_weight(e, i, j);
  return apply_Kt(e);
}

extern "C" {
void dpbtrf_(const char* uplo, const int* n, const int* kd, double* ab,
             const int* ldab, int* info);
void dpbtrs_(const char* uplo, const int* n, const int* kd, const int* nrhs,
             const double* ab, const int* ldab, double* b, const int* ldb,
             int* info);
}

/// Exact solver for A0 on the interior psi space: banded Cholesky of the
/// assembled operator (iterative solvers crawl on its tight near-kernel of
/// checkerboard-modulated modes). The matrix depends only on the grid size;
/// instances are cached and shared by all solves at that resolution.
class ClampedPlateSolver {
 public:
  explicit ClampedPlateSolver(int n) : n_(n), m_((n - 1) * (n - 1)) {
    kd_ = std::min(4 * (n - 1) + 4, m_ - 1);
    ldab_ = kd_ + 1;
    ab_.assign(size_t(ldab_) * m_, 0.0);

    // assemble by probing the operator with combs of unit impulses spaced
    // beyond twice the stencil reach, so responses cannot overlap
    const int spacing = 9;
    std::vector<Vec2> scratch;
    GridField<double> probe;
    probe.n = n_;
    probe.periodic = false;
    DomainGrid g(n_);
    for (int a = 0; a < spacing; ++a)
      for (int b = 0; b < spacing; ++b) {
        probe.v.assign(size_t(n_ + 1) * (n_ + 1), 0.0);
        bool any = false;
        for (int j = 1 + b; j < n_; j += spacing)
          for (int i = 1 + a; i < n_; i += spacing) {
            probe.at(i, j) = 1.0;
            any = true;
          }
        if (!any) continue;
        auto resp = apply_A0(probe, scratch);
        for (int j = 1 + b; j < n_; j += spacing)
          for (int i = 1 + a; i < n_; i += spacing) {
            const int col = dof(i, j);
            for (int dj = -4; dj <= 4; ++dj)
              for (int di = -4; di <= 4; ++di) {
                const int ii = i + di, jj = j + dj;
                if (ii < 1 || ii >= n_ || jj < 1 || jj >= n_) continue;
                const int row = dof(ii, jj);
                if (row < col || row - col > kd_) continue;  // lower band
                const double v = resp.at(ii, jj);
                if (v != 0.0) ab_[size_t(col) * ldab_ + (row - col)] = v;
              }
          }
      }

    // tiny diagonal shift lifts the one exact kernel mode; the solve error
    // it introduces on the orthogonal complement is absorbed by the outer
    // iteration
    double max_diag = 0.0;
    for (int c = 0; c < m_; ++c)
      max_diag = std::max(max_diag, ab_[size_t(c) * ldab_]);
    const double tau = 1e-8 * max_diag;
    for (int c = 0; c < m_; ++c) ab_[size_t(c) * ldab_] += tau;

    int info = 0;
    dpbtrf_("L", &m_, &kd_, ab_.data(), &ldab_, &info);
    if (info != 0)
      throw std::runtime_error("ClampedPlateSolver: factorization failed");
  }

  GridField<double> solve(const GridField<double>& b) const {
    std::vector<double> x(m_);
    for (int j = 1; j < n_; ++j)
      for (int i = 1; i < n_; ++i) x[dof(i, j)] = b.at(i, j);
    int info = 0;
    const int one = 1;
    dpbtrs_("L", &m_, &kd_, &one, ab_.data(), &ldab_, x.data(), &m_, &info);
    if (info != 0) throw std::runtime_error("ClampedPlateSolver: solve failed");
    GridField<double> out;
    out.n = n_;
    out.periodic = false;
    out.v.assign(size_t(n_ + 1) * (n_ + 1), 0.0);
    for (int j = 1; j < n_; ++j)
      for (int i = 1; i < n_; ++i) out.at(i, j) = x[dof(i, j)];
    remove_kernel_mode(out);
    return out;
  }

  /// Shared per-resolution cache (factorizations are expensive).
  static std::shared_ptr<const ClampedPlateSolver> shared(int n) {
    static std::mutex mu;
    static std::map<int, std::weak_ptr<const ClampedPlateSolver>> cache;
    std::scoped_lock lk(mu);
    auto& slot = cache[n];
    if (auto hit = slot.lock()) return hit;
    auto fresh = std::make_shared<const ClampedPlateSolver>(n);
    slot = fresh;
    return fresh;
  }

 private:
  int dof(int i, int j) const { return (j - 1) * (n_ - 1) + (i - 1); }

  int n_;
  int m_;
  int kd_ = 0;
  int ldab_ = 0;
  std::vector<double> ab_;
};

/// Velocity at the true nodes from psi.
inline GridField<Vec2> velocity_of(const GridField<double>& psi) {
  const int n = psi.n;
  GridField<Vec2> u;
  u.n = n;
  u.periodic = false;
  u.v.resize(size_t(n + 1) * (n + 1));
  const double ih2 = 1.0 / (2.0 * psi.h());
  auto ps = [&](int a, int b) { return psi.at(reflect(a, n), reflect(b, n)); };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      u.at(i, j) = {(ps(i, j + 1) - ps(i, j - 1)) * ih2,
                    -(ps(i + 1, j) - ps(i - 1, j)) * ih2};
  return u;
}

/// Secant-slope range of the closure on strains up to the given radius;
/// used for the lagged-diffusion reference viscosity. Deterministic probes.
inline std::pair<double, double> closure_slope_range(const FlowProblem& prob,
                                                     double radius) {
  double bound = radius / std::sqrt(3.0);
  if (prob.closure == ClosureKind::homog)
    bound = std::min(bound, 0.98 * prob.table->xi_max);
  std::mt19937_64 rng(0xf10f);
  std::uniform_real_distribution<double> uc(-bound, bound);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int k = 0; k < 128; ++k) {
    const double x = ux(rng), y = ux(rng);
    SymTensor2 a{uc(rng), uc(rng), uc(rng)};
    SymTensor2 b{uc(rng), uc(rng), uc(rng)};
    if ((a - b).norm() < 1e-9) continue;
    const SymTensor2 sa = prob.closure_stress(x, y, a);
    const SymTensor2 sb = prob.closure_stress(x, y, b);
    const double num = ddot(sa - sb, a - b);
    const double den = (a - b).norm2();
    const double sec = num / den;
    const double slope = (sa - sb).norm() / (a - b).norm();
    lo = std::min(lo, std::max(sec, 1e-12));
    hi = std::max(hi, slope);
  }
  if (!std::isfinite(lo) || hi <= 0.0) return {1.0, 1.0};
  return {lo, hi};
}

/// Momentum flux S_cl(x, D) - u (x) u - F evaluated nodally.
inline GridField<SymTensor2> momentum_flux(const FlowProblem& prob,
                                           const GridField<SymTensor2>& strain,
                                           const GridField<Vec2>& u) {
  const int n = prob.grid.n;
  const double h = prob.grid.h();
  GridField<SymTensor2> e;
  e.n = n;
  e.periodic = false;
  e.v.resize(strain.v.size());
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      SymTensor2 s = prob.closure_stress(i * h, j * h, strain.at(i, j));
      if (prob.convection) s -= outer(u.at(i, j));
      e.at(i, j) = s - prob.F.at(i, j);
    }
  return e;
}

}  // namespace flowdetail

// ---------------------------------------------------------------------------
// Pressure recovery: grad(pi) = div(E) for the converged momentum flux E.
// Weak Q1 form with the consistent mass/stiffness tensor structure, solved
// exactly by DCT-I diagonalization, then re-centered to zero mean.

namespace flowdetail {

/// div(E) with centered interior differences and one-sided second-order
/// stencils on the walls (the zero-extension stencil is wrong for fluxes
/// that do not vanish on the boundary).
inline GridField<Vec2> div_onesided(const GridField<SymTensor2>& t) {
  const int n = t.n;
  const double h = t.h();
  GridField<Vec2> out;
  out.n = n;
  out.periodic = false;
  out.v.resize(t.v.size());
  auto dx = [&](auto&& comp, int i, int j) {
    if (i == 0)
      return (-3.0 * comp(0, j) + 4.0 * comp(1, j) - comp(2, j)) / (2.0 * h);
    if (i == n)
      return (3.0 * comp(n, j) - 4.0 * comp(n - 1, j) + comp(n - 2, j)) /
             (2.0 * h);
    return (comp(i + 1, j) - comp(i - 1, j)) / (2.0 * h);
  };
  auto dy = [&](auto&& comp, int i, int j) {
    if (j == 0)
      return (-3.0 * comp(i, 0) + 4.0 * comp(i, 1) - comp(i, 2)) / (2.0 * h);
    if (j == n)
      return (3.0 * comp(i, n) - 4.0 * comp(i, n - 1) + comp(i, n - 2)) /
             (2.0 * h);
    return (comp(i, j + 1) - comp(i, j - 1)) / (2.0 * h);
  };
  auto xx = [&](int i, int j) { return t.at(i, j).xx; };
  auto yy = [&](int i, int j) { return t.at(i, j).yy; };
  auto xy = [&](int i, int j) { return t.at(i, j).xy; };
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      out.at(i, j) = {dx(xx, i, j) + dy(xy, i, j),
                      dx(xy, i, j) + dy(yy, i, j)};
  return out;
}

/// Solve the Q1 Neumann Laplacian A pi = b by cosine transforms. b must be
/// compatible (zero total); the constant mode is pinned to zero and the
/// result re-centered to zero trapezoidal mean.
inline GridField<double> solve_neumann_q1(const DomainGrid& grid,
                                          GridField<double> b) {
  const int n = grid.n;
  const int m = n + 1;
  const double h = grid.h();
  // undo the half-row boundary scaling of the assembled operator
  for (int i = 0; i <= n; ++i) {
    b.at(i, 0) *= 2.0;
    b.at(i, n) *= 2.0;
    b.at(0, i) *= 2.0;
    b.at(n, i) *= 2.0;
  }
  // with C = REDFT00 and eigenvalues lam of the reflected operators, the
  // solve is pi = C lam^{-1} C b / (2n)^2
  std::vector<double> buf(size_t(m) * m);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) buf[size_t(j) * m + i] = b.at(i, j);
  FftEngine::instance().dct1_2d(m, m, buf.data());
  auto lamK = [&](int k) {
    return (2.0 - 2.0 * std::cos(std::numbers::pi * k / n)) / h;
  };
  auto lamM = [&](int k) {
    return h * (2.0 + std::cos(std::numbers::pi * k / n)) / 3.0;
  };
  for (int l = 0; l <= n; ++l)
    for (int k = 0; k <= n; ++k) {
      if (k == 0 && l == 0) {
        buf[0] = 0.0;
        continue;
      }
      const double lam = lamK(k) * lamM(l) + lamM(k) * lamK(l);
      buf[size_t(l) * m + k] /= lam;
    }
  FftEngine::instance().dct1_2d(m, m, buf.data());
  GridField<double> pi(grid);
  const double norm = 1.0 / (4.0 * double(n) * n);  // (2n)^2
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) pi.at(i, j) = buf[size_t(j) * m + i] * norm;
  const double mean = integrate(pi);  // domain area is 1
  for (auto& v : pi.v) v -= mean;
  return pi;
}

/// Right-hand side of the weak pressure Poisson problem: b_a = int q . grad
/// chi_a with q bilinear per cell, 2x2 Gauss quadrature.
inline GridField<double> ppe_rhs(const DomainGrid& grid,
                                 const GridField<Vec2>& q) {
  const int n = grid.n;
  const double h = grid.h();
  GridField<double> b(grid);
  const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (int cj = 0; cj < n; ++cj)
    for (int ci = 0; ci < n; ++ci) {
      const Vec2 q00 = q.at(ci, cj), q10 = q.at(ci + 1, cj);
      const Vec2 q01 = q.at(ci, cj + 1), q11 = q.at(ci + 1, cj + 1);
      for (int gy = 0; gy < 2; ++gy)
        for (int gx = 0; gx < 2; ++gx) {
          const double s = gp[gx], t = gp[gy];
          const Vec2 qg = q00 * ((1 - s) * (1 - t)) + q10 * (s * (1 - t)) +
                          q01 * ((1 - s) * t) + q11 * (s * t);
          const double w = 0.25 * h * h;
          // gradients of the four corner hats at (s, t), scaled by 1/h
          const double gxs[4] = {-(1 - t), (1 - t), -t, t};
          const double gys[4] = {-(1 - s), -s, (1 - s), s};
          const int ii[4] = {ci, ci + 1, ci, ci + 1};
          const int jj[4] = {cj, cj, cj + 1, cj + 1};
          for (int a = 0; a < 4; ++a)
            b.at(ii[a], jj[a]) +=
                w * (qg.x * gxs[a] / h + qg.y * gys[a] / h);
        }
    }
  return b;
}

}  // namespace flowdetail

/// Solve the discrete micro or homogenized flow problem. Outer Picard loop
/// with lagged stress and convective flux against a constant reference
/// viscosity; each correction is a preconditioned CG solve of the
/// stream-function Stokes operator.
inline FlowSolution solve_flow(const FlowProblem& prob) {
  using namespace flowdetail;
  prob.validate();
  const int n = prob.grid.n;

  GridField<double> psi(prob.grid);
  std::vector<Vec2> scratch;

  // reference viscosity from sampled closure slopes around the expected
  // strain range
  double strain_radius = 1.0 + 2.0 * lp_norm(prob.F, std::numeric_limits<double>::infinity());
  auto [slope_lo, slope_hi] = closure_slope_range(prob, strain_radius);
  double mu_eff = 0.5 * (slope_lo + slope_hi);

  FlowSolution sol;
  sol.psi = psi;
  sol.u = velocity_of(psi);

  PsiPreconditioner pre(n, mu_eff);

  auto strain = apply_K(psi, scratch);
  auto flux = momentum_flux(prob, strain, sol.u);
  auto weighted = [&](GridField<SymTensor2> e) {
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        e.at(i, j) = e.at(i, j) * quad_weight(e, i, j);
    return apply_Kt(e);
  };
  // residual norms live in the preconditioner (energy dual) metric: that is
  // the norm the iteration contracts in, and the one weak_residual sees
  auto energy_norm = [&](const GridField<double>& r) {
    auto z = pre.apply(r);
    return std::sqrt(std::max(0.0, dot_plain(r, z)));
  };
  auto residual = weighted(flux);
  remove_kernel_mode(residual);

  auto f_res = weighted(prob.F);
  remove_kernel_mode(f_res);
  const double f_scale = std::max(energy_norm(f_res), 1e-30);
  double res_norm = energy_norm(residual);

  int it = 0;
  for (; it < prob.picard_max; ++it) {
    const double rel = res_norm / f_scale;
    if (rel <= prob.stokes_tol) {
      sol.converged = true;
      break;
    }
    // loose inner solves: the outer loop re-assembles the exact residual,
    // so inner inexactness affects the rate only (tight solves are very
    // expensive for the clamped operator)
    auto delta = solve_A0(residual, pre, 0.05, 400);

    double omega = 1.0 / mu_eff;
    GridField<double> psi_new = psi;
    double res_new = res_norm;
    GridField<SymTensor2> strain_new;
    GridField<SymTensor2> flux_new;
    GridField<Vec2> u_new;
    GridField<double> r_new;
    for (int bt = 0; bt < 20; ++bt) {
      psi_new = psi;
      for (size_t k = 0; k < psi.v.size(); ++k)
        psi_new.v[k] -= omega * delta.v[k];
      remove_kernel_mode(psi_new);
      strain_new = apply_K(psi_new, scratch);
      u_new = velocity_of(psi_new);
      flux_new = momentum_flux(prob, strain_new, u_new);
      r_new = weighted(flux_new);
      remove_kernel_mode(r_new);
      res_new = energy_norm(r_new);
      if (res_new < res_norm || res_norm == 0.0) break;
      omega *= 0.5;
    }

    // velocity-change stopping measure in the W^{1,p} seminorm
    GridField<SymTensor2> dstrain = strain_new;
    for (size_t k = 0; k < dstrain.v.size(); ++k) dstrain.v[k] -= strain.v[k];
    const double du_change =
        lp_norm(dstrain, prob.closure == ClosureKind::micro
                             ? prob.law->exponent_p()
                             : prob.table->p);

    psi = std::move(psi_new);
    strain = std::move(strain_new);
    sol.u = std::move(u_new);
    residual = std::move(r_new);
    res_norm = res_new;

    if (du_change <= prob.picard_tol && res_norm / f_scale <= prob.stokes_tol) {
      sol.converged = true;
      ++it;
      break;
    }
  }
  sol.picard_iters = it;
  sol.psi = psi;
  sol.final_residuals.momentum = res_norm / f_scale;
  sol.converged = sol.converged || res_norm / f_scale <= prob.stokes_tol;

  // pressure recovery: grad(pi) = div(S - u(x)u - F)
  auto flux_final = momentum_flux(prob, strain, sol.u);
  auto q = flowdetail::div_onesided(flux_final);
  auto b = flowdetail::ppe_rhs(prob.grid, q);
  sol.pi = flowdetail::solve_neumann_q1(prob.grid, b);

  // interior nodes only: on the walls the zero-extension stencil measures
  // the normal trace jump, not the divergence
  auto div_u = divergence(sol.u);
  double d2 = 0.0;
  for (int j = 1; j < n; ++j)
    for (int i = 1; i < n; ++i)
      d2 += quad_weight(div_u, i, j) * div_u.at(i, j) * div_u.at(i, j);
  sol.final_residuals.divergence = std::sqrt(d2);
  return sol;
}

/// Max over seeded band-limited stream-function test fields w = curl(phi) of
/// |int (S - u(x)u - pi I - F) : Dw| / ||Dw||_{L^2}. The trace-free discrete
/// strain makes the pi I term vanish identically.
inline double weak_residual(const FlowSolution& sol, const FlowProblem& prob,
                            int n_tests, uint64_t seed) {
  using namespace flowdetail;
  const int n = prob.grid.n;
  std::vector<Vec2> scratch;
  auto strain = apply_K(sol.psi, scratch);
  auto flux = momentum_flux(prob, strain, sol.u);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < n_tests; ++t) {
    double a[4][4];
    for (auto& row : a)
      for (auto& v : row) v = amp(rng);
    GridField<double> phi(prob.grid);
    const double h = prob.grid.h();
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        double v = 0.0;
        for (int k = 1; k <= 4; ++k)
          for (int l = 1; l <= 4; ++l)
            v += a[k - 1][l - 1] * std::sin(std::numbers::pi * k * i * h) *
                 std::sin(std::numbers::pi * l * j * h);
        phi.at(i, j) = v;
      }
    for (int i = 0; i <= n; ++i)
      phi.at(i, 0) = phi.at(i, n) = phi.at(0, i) = phi.at(n, i) = 0.0;
    auto dw = apply_K(phi, scratch);
    double num = 0.0, den = 0.0;
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i) {
        const double w = quad_weight(dw, i, j);
        num += w * ddot(flux.at(i, j), dw.at(i, j));
        den += w * dw.at(i, j).ddot(dw.at(i, j));
      }
    worst = std::max(worst, std::abs(num) / std::sqrt(std::max(den, 1e-300)));
  }
  return worst;
}

struct AprioriReport {
  double du_lp = 0.0;  // ||D u||_{L^p}
  double pi_ls = 0.0;  // ||pi||_{L^s}
  double p = 0.0;
  double s = 0.0;
};

/// The a-priori quantities whose eps-uniform boundedness the sweep asserts.
inline AprioriReport apriori_check(const FlowSolution& sol,
                                   const FlowProblem& prob,
                                   double p_star_2d = 10.0) {
  AprioriReport rep;
  rep.p = prob.closure == ClosureKind::micro ? prob.law->exponent_p()
                                             : prob.table->p;
  rep.s = exponents(rep.p, 2, p_star_2d).s;
  rep.du_lp = lp_norm(sym_gradient(sol.u), rep.p);
  rep.pi_ls = lp_norm(sol.pi, rep.s);
  return rep;
}

// ---------------------------------------------------------------------------
// Manufactured solution: u = 0.1 curl(sin^2(pi x) sin^2(pi y)),
// pi_hat = sin(2 pi x) cos(2 pi y); with F = D(u) - u(x)u + pi_hat I the
// exact solution of the convective problem is (u, -pi_hat).

inline Vec2 manufactured_velocity(double x, double y) {
  const double pi = std::numbers::pi;
  const double sx = std::sin(pi * x), sy = std::sin(pi * y);
  return {0.1 * pi * sx * sx * std::sin(2 * pi * y),
          -0.1 * pi * std::sin(2 * pi * x) * sy * sy};
}

inline double manufactured_pressure(double x, double y) {
  const double pi = std::numbers::pi;
  return std::sin(2 * pi * x) * std::cos(2 * pi * y);
}

inline SymTensor2 manufactured_strain(double x, double y) {
  const double pi = std::numbers::pi;
  const double dxu1 =
      0.1 * pi * pi * std::sin(2 * pi * x) * std::sin(2 * pi * y);
  const double dyu1 = 0.1 * 2 * pi * pi * std::sin(pi * x) * std::sin(pi * x) *
                      std::cos(2 * pi * y);
  const double dxu2 = -0.1 * 2 * pi * pi * std::cos(2 * pi * x) *
                      std::sin(pi * y) * std::sin(pi * y);
  const double dyu2 =
      -0.1 * pi * pi * std::sin(2 * pi * y) * std::sin(2 * pi * x);
  return {dxu1, dyu2, 0.5 * (dyu1 + dxu2)};
}

/// Forcing stress for the manufactured case (p = 2 identity law).
inline GridField<SymTensor2> manufactured_forcing(const DomainGrid& g,
                                                  bool convection) {
  return field_from<SymTensor2>(g, [convection](double x, double y) {
    SymTensor2 f = manufactured_strain(x, y);
    if (convection) f -= outer(manufactured_velocity(x, y));
    const double pr = manufactured_pressure(x, y);
    f.xx += pr;
    f.yy += pr;
    return f;
  });
}

}  // namespace homogflow
