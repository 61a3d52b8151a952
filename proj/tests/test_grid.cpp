#include "homogflow/grid.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace homogflow;
constexpr double kPi = std::numbers::pi;

TEST(grid, constructors_validate) {
  EXPECT_THROW(PeriodicGrid(4), std::invalid_argument);
  EXPECT_THROW(PeriodicGrid(24), std::invalid_argument);
  EXPECT_THROW(DomainGrid(4), std::invalid_argument);
  EXPECT_NO_THROW(DomainGrid(10));
  EXPECT_NO_THROW(PeriodicGrid(32));
}

TEST(grid, sym_gradient_constant_and_shear) {
  DomainGrid g(16);
  auto cf = field_from<Vec2>(g, [](double, double) { return Vec2{1.0, 2.0}; });
  auto d = sym_gradient(cf);
  for (int i = 1; i < g.n; ++i)
    for (int j = 1; j < g.n; ++j) EXPECT_NEAR(d.at(i, j).norm(), 0.0, 1e-14);

  auto shear = field_from<Vec2>(g, [](double, double y) { return Vec2{y, 0.0}; });
  auto ds = sym_gradient(shear);
  for (int i = 1; i < g.n; ++i)
    for (int j = 1; j < g.n; ++j) {
      EXPECT_NEAR(ds.at(i, j).xx, 0.0, 1e-14);
      EXPECT_NEAR(ds.at(i, j).yy, 0.0, 1e-14);
      EXPECT_NEAR(ds.at(i, j).xy, 0.5, 1e-13);
    }
}

TEST(grid, sym_gradient_periodic_mode_second_order) {
  // v = (sin 2 pi y, 0): Dv_xx = 0, Dv_xy = pi cos(2 pi y).
  double prev_err = 0.0;
  for (int n : {32, 64, 128}) {
    PeriodicGrid g(n);
    auto v = field_from<Vec2>(
        g, [](double, double y) { return Vec2{std::sin(2 * kPi * y), 0.0}; });
    auto d = sym_gradient(v);
    double err = 0.0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        EXPECT_NEAR(d.at(i, j).xx, 0.0, 1e-12);
        err = std::max(err,
                       std::abs(d.at(i, j).xy - kPi * std::cos(2 * kPi * j / n)));
      }
    if (prev_err > 0.0) {
      const double ratio = prev_err / err;
      EXPECT_GT(ratio, 3.6);
      EXPECT_LT(ratio, 4.4);
    }
    prev_err = err;
  }
}

TEST(grid, divergence_examples) {
  DomainGrid g(32);
  auto lin =
      field_from<Vec2>(g, [](double x, double y) { return Vec2{x, -y}; });
  auto dv = divergence(lin);
  for (int i = 1; i < g.n; ++i)
    for (int j = 1; j < g.n; ++j) EXPECT_NEAR(dv.at(i, j), 0.0, 1e-13);

  auto q = field_from<Vec2>(g, [](double x, double) { return Vec2{x * x, 0.0}; });
  auto dq = divergence(q);
  EXPECT_NEAR(dq.at(16, 16), 1.0, 1e-12);  // exact: centered diff of quadratic
}

TEST(grid, divergence_second_order_convergence) {
  double prev_err = 0.0;
  for (int n : {32, 64}) {
    PeriodicGrid g(n);
    auto v = field_from<Vec2>(g, [](double x, double y) {
      return Vec2{std::sin(2 * kPi * x) * std::cos(2 * kPi * y),
                  std::cos(4 * kPi * x)};
    });
    auto dv = divergence(v);
    auto exact = field_from<double>(g, [](double x, double y) {
      return 2 * kPi * std::cos(2 * kPi * x) * std::cos(2 * kPi * y);
    });
    double err = 0.0;
    for (size_t k = 0; k < dv.v.size(); ++k)
      err = std::max(err, std::abs(dv.v[k] - exact.v[k]));
    if (prev_err > 0.0) {
      EXPECT_GT(prev_err / err, 3.6);
      EXPECT_LT(prev_err / err, 4.4);
    }
    prev_err = err;
  }
}

TEST(grid, integrate_examples) {
  PeriodicGrid gy(32);
  auto oney = field_from<double>(gy, [](double, double) { return 1.0; });
  EXPECT_NEAR(integrate(oney), 1.0, 1e-14);

  DomainGrid gd(32);
  auto oned = field_from<double>(gd, [](double, double) { return 1.0; });
  EXPECT_NEAR(integrate(oned), 1.0, 1e-14);

  auto s = field_from<double>(gy,
                              [](double x, double) { return std::sin(2 * kPi * x); });
  EXPECT_NEAR(integrate(s), 0.0, 1e-14);
}

TEST(grid, lp_norm_examples) {
  PeriodicGrid g(16);
  auto two = field_from<double>(g, [](double, double) { return 2.0; });
  EXPECT_NEAR(lp_norm(two, 3.0), 2.0, 1e-13);

  GridField<double> zero(g);
  EXPECT_DOUBLE_EQ(lp_norm(zero, 2.0), 0.0);

  auto half = field_from<double>(
      g, [](double x, double) { return x < 0.5 ? 1.0 : 0.0; });
  EXPECT_NEAR(lp_norm(half, 2.0), std::sqrt(0.5), 1e-13);

  // homogeneity
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridField<double> r(g);
  for (auto& x : r.v) x = d(rng);
  for (double p : {1.0, 2.0, 3.5}) {
    GridField<double> rc = r;
    for (auto& x : rc.v) x *= -3.7;
    EXPECT_NEAR(lp_norm(rc, p), 3.7 * lp_norm(r, p),
                1e-13 * (1.0 + lp_norm(rc, p)));
  }
  EXPECT_NEAR(lp_norm(two, std::numeric_limits<double>::infinity()), 2.0, 0.0);
}

TEST(grid, discrete_adjointness_on_torus) {
  PeriodicGrid g(32);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridField<SymTensor2> t(g);
  for (auto& x : t.v) x = {d(rng), d(rng), d(rng)};
  GridField<Vec2> v(g);
  for (auto& x : v.v) x = {d(rng), d(rng)};

  const double lhs = dot_l2(divergence(t), v) + dot_l2(t, sym_gradient(v));
  EXPECT_LE(std::abs(lhs), 1e-10 * lp_norm(t, 2.0) * lp_norm(v, 2.0));
}

TEST(grid, spectral_contract) {
  PeriodicGrid g(32);
  auto c = field_from<double>(g, [](double, double) { return 3.25; });
  auto coef = spectral_forward(c);
  for (size_t k = 1; k < coef[0].size(); ++k)
    EXPECT_NEAR(std::abs(coef[0][k]), 0.0, 1e-10);
  EXPECT_NEAR(coef[0][0].real(), 3.25 * 32 * 32, 1e-9);

  auto mode = field_from<double>(
      g, [](double x, double) { return std::sin(2 * kPi * x); });
  auto mc = spectral_forward(mode);
  int nonzero = 0;
  for (auto& z : mc[0])
    if (std::abs(z) > 1e-8) ++nonzero;
  EXPECT_EQ(nonzero, 2);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  GridField<SymTensor2> r(g);
  for (auto& x : r.v) x = {d(rng), d(rng), d(rng)};
  auto back = spectral_inverse<SymTensor2>(g, spectral_forward(r));
  double num = 0.0, den = 0.0;
  for (size_t k = 0; k < r.v.size(); ++k) {
    num += (back.v[k] - r.v[k]).norm2();
    den += r.v[k].norm2();
  }
  EXPECT_LE(std::sqrt(num / den), 1e-12);

  GridField<double> bad;
  bad.n = 24;  // bypasses the PeriodicGrid check on purpose
  bad.periodic = true;
  bad.v.resize(24 * 24);
  EXPECT_THROW(spectral_forward(bad), std::invalid_argument);
}
