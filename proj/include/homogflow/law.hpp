#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "homogflow/expression.hpp"
#include "homogflow/grid.hpp"
#include "homogflow/tensor.hpp"

namespace homogflow {

/// p' = p/(p-1), the Sobolev conjugate p* (configurable for d = 2 where any
/// finite exponent is admissible) and the pressure integrability exponent s.
struct ExponentSet {
  double p_prime;
  double p_star;
  double s;
  bool p_star_is_configured;  // d = 2: p* > 1 is a free choice
};

inline ExponentSet exponents(double p, int d, double p_star_2d = 10.0) {
  if (d < 2) throw std::invalid_argument("exponents: d must be >= 2");
  if (!(p > 2.0 * d / (d + 2.0)))
    throw std::invalid_argument("exponents: p must exceed 2d/(d+2)");
  ExponentSet e{};
  e.p_prime = p / (p - 1.0);
  if (d == 2) {
    if (!(p_star_2d > 1.0))
      throw std::invalid_argument("exponents: p* must exceed 1");
    e.p_star = p_star_2d;
    e.p_star_is_configured = true;
  } else if (p < d) {
    e.p_star = d * p / (d - p);
    e.p_star_is_configured = false;
  } else {
    e.p_star = p_star_2d;  // supercritical: any finite exponent works
    e.p_star_is_configured = true;
  }
  e.s = (p < d) ? std::min(d * p / (2.0 * (d - p)), e.p_prime) : e.p_prime;
  return e;
}

/// Coercivity/growth constants: S(y,xi):xi >= c1 |xi|^p - c1_tilde and
/// |S(y,xi)|^{p'} <= c2 (|xi|^p + 1).
struct GrowthConstants {
  double c1 = 0.0;
  double c1_tilde = 0.0;
  double c2 = 0.0;
};

/// Microscopic constitutive map S(y, xi), Y-periodic in y.
class StressLaw {
 public:
  virtual ~StressLaw() = default;

  virtual SymTensor2 stress(const Vec2& y, const SymTensor2& xi) const = 0;
  virtual bool has_potential() const { return false; }
  virtual double potential(const Vec2&, const SymTensor2&) const {
    throw std::logic_error("StressLaw: potential capability absent");
  }
  virtual double exponent_p() const = 0;
  /// Analytic constants when known; nullptr otherwise.
  virtual const GrowthConstants* declared_constants() const { return nullptr; }
  /// Canonical description used for table hashes and reports.
  virtual std::string signature() const = 0;
};

/// Coefficient function on Y: a constant, a closed-form expression, or a
/// sampled periodic field looked up at the nearest cell.
class Coefficient {
 public:
  Coefficient() : kind_(Kind::constant), c_(0.0) {}
  static Coefficient constant(double c) {
    Coefficient k;
    k.kind_ = Kind::constant;
    k.c_ = c;
    return k;
  }
  static Coefficient expression(const std::string& text) {
    Coefficient k;
    k.kind_ = Kind::expression;
    k.expr_ = Expression::parse(text);
    return k;
  }
  static Coefficient sampled(GridField<double> f) {
    if (!f.periodic)
      throw std::invalid_argument("Coefficient: sampled field must be periodic");
    Coefficient k;
    k.kind_ = Kind::sampled;
    k.field_ = std::move(f);
    return k;
  }

  double eval(const Vec2& y) const {
    switch (kind_) {
      case Kind::constant: return c_;
      case Kind::expression: return expr_.eval(y.x, y.y);
      case Kind::sampled: {
        const int n = field_.n;
        auto wrap = [n](long i) { return static_cast<int>(((i % n) + n) % n); };
        const int ix = wrap(std::lround(y.x * n));
        const int iy = wrap(std::lround(y.y * n));
        return field_.at(ix, iy);
      }
    }
    return 0.0;
  }

  std::string describe() const {
    switch (kind_) {
      case Kind::constant: {
        std::ostringstream os;
        os.precision(17);
        os << c_;
        return os.str();
      }
      case Kind::expression: return "expr:" + expr_.text();
      case Kind::sampled: return "sampled:n=" + std::to_string(field_.n);
    }
    return {};
  }

 private:
  enum class Kind { constant, expression, sampled };
  Kind kind_;
  double c_ = 0.0;
  Expression expr_;
  GridField<double> field_;
};

/// The model law S(y,xi) = alpha(y) (delta+|xi|^2)^{(p-2)/2} xi
///                        + beta(y) (delta+|xi|^2)^{(gamma(y)-2)/2} xi
/// with 0 < alpha0 <= alpha <= alpha1, 0 <= beta <= beta0,
/// 1 <= gamma0 <= gamma <= gamma1 < p.
class ERModelLaw : public StressLaw {
 public:
  struct Bounds {
    double alpha0 = 1.0, alpha1 = 1.0;
    double beta0 = 0.0;
    double gamma0 = 1.0, gamma1 = 1.0;
  };

  ERModelLaw(double p, double delta, Coefficient alpha, Coefficient beta,
             Coefficient gamma, Bounds bounds, bool expose_potential = true)
      : p_(p),
        delta_(delta),
        alpha_(std::move(alpha)),
        beta_(std::move(beta)),
        gamma_(std::move(gamma)),
        bounds_(bounds),
        expose_potential_(expose_potential) {
    if (!(p_ > 1.0)) throw std::invalid_argument("ERModelLaw: p must exceed 1");
    if (delta_ < 0.0) throw std::invalid_argument("ERModelLaw: delta >= 0");
    if (!(bounds_.alpha0 > 0.0) || bounds_.alpha0 > bounds_.alpha1 ||
        bounds_.beta0 < 0.0 || bounds_.gamma0 < 1.0 ||
        bounds_.gamma0 > bounds_.gamma1 || !(bounds_.gamma1 < p_))
      throw std::invalid_argument("ERModelLaw: coefficient bounds violated");
    verify_coefficient_ranges();
    constants_ = derive_constants();
  }

  SymTensor2 stress(const Vec2& y, const SymTensor2& xi) const override {
    const double q = delta_ + xi.norm2();
    const double b = beta_.eval(y);
    if (delta_ == 0.0 && q == 0.0) {
      if (p_ < 2.0 || (b != 0.0 && gamma_.eval(y) < 2.0))
        throw std::domain_error("ERModelLaw: singular evaluation at xi = 0");
      return SymTensor2{};
    }
    const double g = gamma_.eval(y);
    const double f = alpha_.eval(y) * std::pow(q, 0.5 * (p_ - 2.0)) +
                     b * std::pow(q, 0.5 * (g - 2.0));
    return xi * f;
  }

  bool has_potential() const override { return expose_potential_; }

  /// W(y,xi) = (alpha/p)(delta+|xi|^2)^{p/2} + (beta/gamma)(delta+|xi|^2)^{gamma/2};
  /// its xi-gradient is the stress.
  double potential(const Vec2& y, const SymTensor2& xi) const override {
    if (!expose_potential_)
      return StressLaw::potential(y, xi);
    const double q = delta_ + xi.norm2();
    const double g = gamma_.eval(y);
    return alpha_.eval(y) / p_ * std::pow(q, 0.5 * p_) +
           beta_.eval(y) / g * std::pow(q, 0.5 * g);
  }

  double exponent_p() const override { return p_; }
  double delta() const { return delta_; }
  const Bounds& bounds() const { return bounds_; }
  const GrowthConstants* declared_constants() const override {
    return &constants_;
  }

  std::string signature() const override {
    std::ostringstream os;
    os.precision(17);
    os << "er_model;p=" << p_ << ";delta=" << delta_
       << ";alpha=" << alpha_.describe() << ";beta=" << beta_.describe()
       << ";gamma=" << gamma_.describe();
    return os.str();
  }

 private:
  void verify_coefficient_ranges() const {
    const int m = 64;
    const double tol = 1e-12;
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i) {
        const Vec2 y{double(i) / m, double(j) / m};
        const double a = alpha_.eval(y), b = beta_.eval(y), g = gamma_.eval(y);
        if (a < bounds_.alpha0 - tol || a > bounds_.alpha1 + tol)
          throw std::invalid_argument("ERModelLaw: alpha outside bounds");
        if (b < -tol || b > bounds_.beta0 + tol)
          throw std::invalid_argument("ERModelLaw: beta outside bounds");
        if (b != 0.0 && (g < bounds_.gamma0 - tol || g > bounds_.gamma1 + tol))
          throw std::invalid_argument("ERModelLaw: gamma outside bounds");
      }
  }

  GrowthConstants derive_constants() const {
    GrowthConstants c;
    c.c1 = bounds_.alpha0;
    // S:xi >= alpha (delta+|xi|^2)^{(p-2)/2} |xi|^2; for p >= 2 this already
    // dominates alpha0 |xi|^p. For p < 2 write |xi|^2 = (delta+|xi|^2) - delta.
    c.c1_tilde = (p_ >= 2.0) ? 0.0 : bounds_.alpha0 * std::pow(delta_, 0.5 * p_);
    const double pp = p_ / (p_ - 1.0);
    auto coef_bound = [this](double q) {
      // (delta+t^2)^{(q-2)/2} t <= C_q (1 + t^{p-1})
      if (q <= 2.0) return 1.0;
      return std::pow(2.0, 0.5 * (q - 2.0)) *
             (std::pow(delta_, 0.5 * (q - 2.0)) + 1.0);
    };
    const double K = bounds_.alpha1 * coef_bound(p_) +
                     bounds_.beta0 * coef_bound(bounds_.gamma1);
    c.c2 = std::pow(2.0, pp - 1.0) * std::pow(K, pp);
    return c;
  }

  double p_;
  double delta_;
  Coefficient alpha_, beta_, gamma_;
  Bounds bounds_;
  bool expose_potential_;
  GrowthConstants constants_;
};

inline std::shared_ptr<ERModelLaw> make_power_law(double p, double delta,
                                                  double alpha = 1.0) {
  ERModelLaw::Bounds b;
  b.alpha0 = b.alpha1 = alpha;
  b.gamma0 = b.gamma1 = 0.5 * (1.0 + p);  // beta = 0, gamma never enters
  return std::make_shared<ERModelLaw>(p, delta, Coefficient::constant(alpha),
                                      Coefficient::constant(0.0),
                                      Coefficient::constant(b.gamma0), b);
}

/// Numerical evidence for Assumption (S1)-(S4) on seeded samples.
struct AssumptionReport {
  double min_monotonicity = 0.0;   // min (S(xi1)-S(xi2)):(xi1-xi2), xi1 != xi2
  double max_periodicity_gap = 0.0;  // relative to 1 + |S|
  GrowthConstants fitted;          // constants that hold on every sample
  bool monotonicity_ok = false;
  bool periodicity_ok = false;
  bool coercivity_ok = false;      // fitted c1 > 0
  bool growth_ok = false;          // fitted c2 finite
  bool pass = false;
  int samples = 0;
  std::string note;
};

inline AssumptionReport check_assumptions(const StressLaw& law, int n_samples,
                                          uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("check_assumptions: n_samples >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uy(0.0, 1.0);
  std::uniform_real_distribution<double> ux(-10.0 / std::sqrt(6.0),
                                            10.0 / std::sqrt(6.0));
  auto random_xi = [&] {
    // components bounded so that |xi| <= 10
    return SymTensor2{ux(rng), ux(rng), ux(rng)};
  };

  AssumptionReport rep;
  rep.samples = n_samples;
  rep.min_monotonicity = std::numeric_limits<double>::infinity();
  const double p = law.exponent_p();
  const double pp = p / (p - 1.0);

  std::vector<std::pair<double, double>> pairing;  // (S:xi, |xi|)
  pairing.reserve(n_samples);
  double c2_candidate = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const Vec2 y{uy(rng), uy(rng)};
    SymTensor2 x1 = random_xi();
    SymTensor2 x2 = random_xi();
    while ((x1 - x2).norm() < 1e-8) x2 = random_xi();
    const SymTensor2 s1 = law.stress(y, x1);
    const SymTensor2 s2 = law.stress(y, x2);
    rep.min_monotonicity =
        std::min(rep.min_monotonicity, ddot(s1 - s2, x1 - x2));

    pairing.emplace_back(ddot(s1, x1), x1.norm());
    c2_candidate = std::max(
        c2_candidate, std::pow(s1.norm(), pp) / (std::pow(x1.norm(), p) + 1.0));

    const SymTensor2 sx = law.stress({y.x + 1.0, y.y}, x1);
    const SymTensor2 sy = law.stress({y.x, y.y + 1.0}, x1);
    const double scale = 1.0 + s1.norm();
    rep.max_periodicity_gap =
        std::max(rep.max_periodicity_gap,
                 std::max((sx - s1).norm(), (sy - s1).norm()) / scale);
  }
  double worst_neg = 0.0;
  for (auto& [sx, nx] : pairing) worst_neg = std::min(worst_neg, sx);
  rep.fitted.c1_tilde = std::max(0.0, -worst_neg) * (1.0 + 1e-9);
  double c1_candidate = std::numeric_limits<double>::infinity();
  for (auto& [sx, nx] : pairing)
    if (nx > 0.5)
      c1_candidate = std::min(
          c1_candidate, (sx + rep.fitted.c1_tilde + 1e-12) / std::pow(nx, p));
  rep.fitted.c1 = std::isfinite(c1_candidate) ? std::max(c1_candidate, 0.0) : 0.0;
  rep.fitted.c2 = c2_candidate * (1.0 + 1e-9);
  rep.monotonicity_ok = rep.min_monotonicity > 0.0;
  rep.periodicity_ok = rep.max_periodicity_gap <= 1e-14;
  rep.coercivity_ok = rep.fitted.c1 > 0.0;
  rep.growth_ok = std::isfinite(rep.fitted.c2);
  rep.pass = rep.monotonicity_ok && rep.periodicity_ok && rep.coercivity_ok &&
             rep.growth_ok;
  rep.note = "strict monotonicity sampled on distinct pairs only";
  return rep;
}

/// FNV-1a over the law signature; identifies the law in table files.
inline uint64_t law_hash(const StressLaw& law) {
  const std::string s = law.signature();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace homogflow
