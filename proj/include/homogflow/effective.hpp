#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "homogflow/cell.hpp"
#include "homogflow/threads.hpp"

namespace homogflow {

/// Sampled effective law: hat-S values on a uniform axis-aligned lattice over
/// the three independent strain components, each in [-xi_max, xi_max].
struct EffectiveTable {
  double xi_max = 0.0;
  int m = 0;        // points per axis
  int cell_n = 0;   // cell-grid resolution the nodes were solved on
  double tol = 0.0;
  double p = 0.0;
  uint64_t hash = 0;  // law identity
  std::vector<SymTensor2> nodes;      // m^3 values, index (ixx*m + iyy)*m + ixy
  std::vector<double> residuals;      // recorded solve residuals per node

  size_t index(int i, int j, int k) const {
    return (size_t(i) * m + j) * m + k;
  }
  double coord(int i) const { return -xi_max + 2.0 * xi_max * i / (m - 1); }
  double step() const { return 2.0 * xi_max / (m - 1); }
};

/// Solve every lattice node (parallel over a worker pool); any failed cell
/// solve aborts with the offending strain in the message.
inline EffectiveTable tabulate(const StressLaw& law, double xi_max, int m,
                               const PeriodicGrid& grid,
                               const CellSolveOptions& opt = {},
                               int workers = 1) {
  if (m < 2) throw std::invalid_argument("tabulate: m >= 2");
  if (!(xi_max > 0.0)) throw std::invalid_argument("tabulate: xi_max > 0");
  EffectiveTable t;
  t.xi_max = xi_max;
  t.m = m;
  t.cell_n = grid.n;
  t.tol = opt.tol;
  t.p = law.exponent_p();
  t.hash = law_hash(law);
  t.nodes.resize(size_t(m) * m * m);
  t.residuals.resize(t.nodes.size());

  parallel_for(m * m * m, workers, [&](int flat) {
    const int i = flat / (m * m), j = (flat / m) % m, k = flat % m;
    const SymTensor2 xi{t.coord(i), t.coord(j), t.coord(k)};
    CellSolution sol = solve_cell(law, xi, grid, opt);
    if (!sol.converged) {
      std::ostringstream os;
      os << "tabulate: cell solve failed at xi = (" << xi.xx << ", " << xi.yy
         << ", " << xi.xy << "), residual " << sol.residual;
      throw std::runtime_error(os.str());
    }
    auto s = detail::stress_field(law, xi, sol.V);
    t.nodes[t.index(i, j, k)] = mean_value(s);
    t.residuals[t.index(i, j, k)] = sol.residual;
  });
  return t;
}

/// Componentwise trilinear interpolation; strains outside the lattice hull
/// are a domain error, never an extrapolation.
inline SymTensor2 interpolate(const EffectiveTable& t, const SymTensor2& xi) {
  const double eps = 1e-12 * t.xi_max;
  auto locate = [&](double x, int& i0, double& w) {
    if (x < -t.xi_max - eps || x > t.xi_max + eps)
      throw std::domain_error("interpolate: strain outside the table hull");
    double u = (x + t.xi_max) / t.step();
    i0 = std::min(int(u), t.m - 2);
    if (i0 < 0) i0 = 0;
    w = u - i0;
    if (w < 0.0) w = 0.0;
    if (w > 1.0) w = 1.0;
  };
  int i0, j0, k0;
  double wi, wj, wk;
  locate(xi.xx, i0, wi);
  locate(xi.yy, j0, wj);
  locate(xi.xy, k0, wk);
  SymTensor2 out{};
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk) {
        const double w = (di ? wi : 1.0 - wi) * (dj ? wj : 1.0 - wj) *
                         (dk ? wk : 1.0 - wk);
        out += t.nodes[t.index(i0 + di, j0 + dj, k0 + dk)] * w;
      }
  return out;
}

inline bool in_hull(const EffectiveTable& t, const SymTensor2& xi) {
  const double eps = 1e-12 * t.xi_max;
  return xi.xx >= -t.xi_max - eps && xi.xx <= t.xi_max + eps &&
         xi.yy >= -t.xi_max - eps && xi.yy <= t.xi_max + eps &&
         xi.xy >= -t.xi_max - eps && xi.xy <= t.xi_max + eps;
}

/// Constants of the effective-law bounds derived from validated law
/// constants: coercivity keeps (c1, c1_tilde); growth follows the Young
/// inequality chain with the explicit constant below.
struct HatConstants {
  double c1, c1_tilde, c2_hat;
};

inline HatConstants hat_constants(const GrowthConstants& c, double p) {
  const double pp = p / (p - 1.0);
  const double young = (1.0 / p) * std::pow(pp / 2.0, -p / pp);
  HatConstants h;
  h.c1 = c.c1;
  h.c1_tilde = c.c1_tilde;
  h.c2_hat = std::max(2.0 * young * std::pow(c.c2 / c.c1, p),
                      2.0 * c.c2 * (1.0 + c.c1_tilde / c.c1));
  return h;
}

struct HatPropertyReport {
  bool coercivity_ok = false;   // at every node
  bool growth_ok = false;       // at every node
  bool monotone_ok = false;     // on all sampled node pairs
  double min_monotonicity = 0.0;
  double continuity_modulus = 0.0;  // sampled sup |dS|/|dxi|
  double worst_coercivity_slack = 0.0;
  double worst_growth_slack = 0.0;
  HatConstants constants{};
  bool pass = false;
};

/// Verify the coercivity/growth bounds at every node and strict monotonicity
/// on seeded node pairs; failures are reported, not thrown.
inline HatPropertyReport check_hat_properties(const EffectiveTable& t,
                                              const GrowthConstants& law_c,
                                              int n_pairs, uint64_t seed) {
  HatPropertyReport rep;
  rep.constants = hat_constants(law_c, t.p);
  const double pp = t.p / (t.p - 1.0);
  const double slack = 1e-9;

  rep.coercivity_ok = rep.growth_ok = true;
  rep.worst_coercivity_slack = std::numeric_limits<double>::infinity();
  rep.worst_growth_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < t.m; ++i)
    for (int j = 0; j < t.m; ++j)
      for (int k = 0; k < t.m; ++k) {
        const SymTensor2 xi{t.coord(i), t.coord(j), t.coord(k)};
        const SymTensor2 s = t.nodes[t.index(i, j, k)];
        const double lhs1 = ddot(s, xi);
        const double rhs1 =
            rep.constants.c1 * std::pow(xi.norm(), t.p) - rep.constants.c1_tilde;
        rep.worst_coercivity_slack =
            std::min(rep.worst_coercivity_slack, lhs1 - rhs1);
        if (lhs1 + slack * (1.0 + std::abs(lhs1)) < rhs1)
          rep.coercivity_ok = false;
        const double lhs2 = std::pow(s.norm(), pp);
        const double rhs2 =
            rep.constants.c2_hat * (std::pow(xi.norm(), t.p) + 1.0);
        rep.worst_growth_slack = std::min(rep.worst_growth_slack, rhs2 - lhs2);
        if (lhs2 > rhs2 * (1.0 + slack)) rep.growth_ok = false;
      }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, t.m - 1);
  rep.min_monotonicity = std::numeric_limits<double>::infinity();
  rep.monotone_ok = true;
  for (int q = 0; q < n_pairs; ++q) {
    int a[3] = {pick(rng), pick(rng), pick(rng)};
    int b[3] = {pick(rng), pick(rng), pick(rng)};
    if (a[0] == b[0] && a[1] == b[1] && a[2] == b[2]) {
      --q;
      continue;
    }
    const SymTensor2 xa{t.coord(a[0]), t.coord(a[1]), t.coord(a[2])};
    const SymTensor2 xb{t.coord(b[0]), t.coord(b[1]), t.coord(b[2])};
    const SymTensor2 sa = t.nodes[t.index(a[0], a[1], a[2])];
    const SymTensor2 sb = t.nodes[t.index(b[0], b[1], b[2])];
    const double mono = ddot(sa - sb, xa - xb);
    rep.min_monotonicity = std::min(rep.min_monotonicity, mono);
    if (mono <= 0.0) rep.monotone_ok = false;
    rep.continuity_modulus =
        std::max(rep.continuity_modulus, (sa - sb).norm() / (xa - xb).norm());
  }
  rep.pass = rep.coercivity_ok && rep.growth_ok && rep.monotone_ok;
  return rep;
}

// ---------------------------------------------------------------------------
// Binary persistence (docs/formats.md): magic, version, metadata header,
// float64 node payload, float64 residuals. Little-endian host assumed.

inline void save_table(const EffectiveTable& t, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_table: cannot open " + path);
  const char magic[8] = {'H', 'G', 'F', 'T', 'A', 'B', 'L', 'E'};
  os.write(magic, 8);
  const uint32_t version = 1;
  auto put = [&os](const void* p, size_t n) {
    os.write(static_cast<const char*>(p), std::streamsize(n));
  };
  put(&version, 4);
  put(&t.hash, 8);
  put(&t.xi_max, 8);
  const uint32_t m = t.m, n = t.cell_n;
  put(&m, 4);
  put(&n, 4);
  put(&t.tol, 8);
  put(&t.p, 8);
  for (const auto& s : t.nodes) {
    put(&s.xx, 8);
    put(&s.yy, 8);
    put(&s.xy, 8);
  }
  put(t.residuals.data(), 8 * t.residuals.size());
  if (!os) throw std::runtime_error("save_table: write failed: " + path);
}

inline EffectiveTable load_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_table: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, "HGFTABLE", 8) != 0)
    throw std::runtime_error("load_table: bad magic in " + path);
  auto get = [&is](void* p, size_t n) {
    is.read(static_cast<char*>(p), std::streamsize(n));
  };
  uint32_t version = 0;
  get(&version, 4);
  if (version != 1) throw std::runtime_error("load_table: unknown version");
  EffectiveTable t;
  get(&t.hash, 8);
  get(&t.xi_max, 8);
  uint32_t m = 0, n = 0;
  get(&m, 4);
  get(&n, 4);
  t.m = int(m);
  t.cell_n = int(n);
  get(&t.tol, 8);
  get(&t.p, 8);
  t.nodes.resize(size_t(t.m) * t.m * t.m);
  for (auto& s : t.nodes) {
    get(&s.xx, 8);
    get(&s.yy, 8);
    get(&s.xy, 8);
  }
  t.residuals.resize(t.nodes.size());
  get(t.residuals.data(), 8 * t.residuals.size());
  if (!is) throw std::runtime_error("load_table: truncated file " + path);
  return t;
}

}  // namespace homogflow
