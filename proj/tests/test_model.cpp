#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "zlab/error.hpp"
#include "zlab/model.hpp"
#include "oracles/exp_oracle.hpp"

using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace zlab;

namespace {

const ModelParams kBase{0.05, 0.3, 0.45, -0.7};
const double kDay = 1.0 / 252.0;

ForwardVarianceCurve bumpy_curve() {
  return ForwardVarianceCurve::piecewise_linear({{0.0, 0.02}, {0.5, 0.03}, {1.0, 0.025}, {1.003, 0.04}});
}

// Z computed straight from its double-integral definition with
// double-exponential quadrature on both levels.
double zumbach_brute_force(const ModelParams& p, const ForwardVarianceCurve& xi, double t, int k, double d) {
  special::MittagLefflerLaw law(p.ml());
  boost::math::quadrature::tanh_sinh<double> ts(12);
  // Integrates f(u) xi(T - u) over [0, x], split where T - u crosses a knot.
  auto kernel_integral = [&](double T, double x) {
    std::vector<double> us{0.0, x};
    for (double kt : xi.kinks(T - x, T)) us.insert(us.end() - 1, T - kt);
    std::sort(us.begin(), us.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < us.size(); ++i)
      sum += ts.integrate([&](double u) { return law.density(u) * xi(T - u); }, us[i], us[i + 1], 1e-12);
    return sum;
  };
  auto inner = [&](double s) { return d - s <= 0.0 ? 0.0 : kernel_integral(t - s, d - s); };
  auto outer = [&](double s) {
    return (law.cdf(s + k * d) - law.cdf(s + (k - 1) * d)) * inner(s);
  };
  std::vector<double> pts{0.0, d};
  for (double kt : xi.kinks(t - d, t)) pts.insert(pts.end() - 1, t - kt);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += ts.integrate(outer, pts[i], pts[i + 1], 1e-11);
  const double c = p.rho * p.nu / p.lambda;
  return 2.0 * c * c * sum;
}

}  // namespace

TEST_CASE("ModelParams validation") {
  CHECK_NOTHROW(kBase.validate());
  CHECK_THROWS_AS((ModelParams{0.0, 0.3, 0.45, -0.7}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{0.6, 0.3, 0.45, -0.7}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{0.1, 0.0, 0.45, -0.7}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{0.1, 0.3, -0.1, -0.7}.validate()), DomainError);
  CHECK_THROWS_AS((ModelParams{0.1, 0.3, 0.45, -1.5}.validate()), DomainError);
  CHECK(kBase.alpha() == 0.55);
}

TEST_CASE("forward variance curve") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  CHECK(flat(0.0) == 0.025);
  CHECK(flat(7.0) == 0.025);
  CHECK_THAT(flat.integral(1.0, 1.5), WithinRel(0.0125, 1e-15));

  auto c = bumpy_curve();
  CHECK_THAT(c(0.25), WithinRel(0.025, 1e-15));
  CHECK(c(5.0) == 0.04);
  CHECK_THAT(c.integral(0.0, 1.0), WithinRel(0.5 * 0.5 * (0.02 + 0.03) + 0.5 * 0.5 * (0.03 + 0.025), 1e-14));
  CHECK_THROWS_AS(c(-1.0), DomainError);
  CHECK_THROWS_AS(ForwardVarianceCurve::flat(0.0), DomainError);
  CHECK_THROWS_AS(ForwardVarianceCurve::piecewise_linear({{0.0, 0.02}, {0.0, 0.03}}), DomainError);
  CHECK_THROWS_AS(ForwardVarianceCurve::piecewise_linear({{0.0, -0.02}}), DomainError);

  const std::string path = "curve_test_knots.csv";
  {
    std::ofstream out(path);
    out << "t,xi\n# comment\n0,0.02\n0.5,0.03\n\n1.0,0.025\n";
  }
  auto loaded = ForwardVarianceCurve::load(path);
  CHECK(loaded.knots().size() == 3);
  CHECK_THAT(loaded(0.75), WithinRel(0.0275, 1e-14));
  {
    std::ofstream out(path);
    out << "t,xi\n0,0.02\n0.5,abc\n";
  }
  try {
    ForwardVarianceCurve::load(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(ForwardVarianceCurve::load("no/such/file.csv"), IoError);
  std::remove(path.c_str());
}

TEST_CASE("g0 closed forms and quadrature cross-check") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  CHECK(g0(kBase, flat, 0.0) == 0.025);
  CHECK_THAT(g0({0.5, 0.3, 0.45, -0.7}, flat, 2.0), WithinRel(0.04, 1e-14));
  CHECK_THAT(g0(kBase, flat, 1.0), WithinRel(0.025 * (1.0 + 0.3 / std::tgamma(1.55)), 1e-14));

  boost::math::quadrature::tanh_sinh<double> ts;
  for (const auto& c : {flat, bumpy_curve()}) {
    for (double t : {0.3, 1.0, 2.5}) {
      const double a = kBase.alpha();
      std::vector<double> pts{0.0};
      for (double k : c.kinks(0.0, t)) pts.push_back(k);
      pts.push_back(t);
      // In u = t - s so that the singular endpoint sits at u = 0.
      double I = 0.0;
      for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        I += ts.integrate([&](double u) { return std::pow(u, a - 1.0) * c(t - u); }, t - pts[i + 1], t - pts[i], 1e-13);
      const double ref = c(t) + kBase.lambda / std::tgamma(a) * I;
      CHECK_THAT(g0(kBase, c, t), WithinRel(ref, 1e-10));
      CHECK(g0(kBase, c, t) >= c(t));
    }
  }
}

TEST_CASE("g_alpha") {
  for (int k : {1, 2, 7, 100}) CHECK_THAT(g_alpha(1.0, k), WithinRel(0.5, 1e-13));

  // Second rule: tanh-sinh on the raw integrand.
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double a : {0.55, 0.8}) {
    for (int k : {1, 2, 10}) {
      const double I = ts.integrate(
          [&](double s) { return (std::pow(k + s, a) - std::pow(k + s - 1.0, a)) * std::pow(1.0 - s, a); }, 0.0, 1.0,
          1e-14);
      const double g = std::tgamma(a + 1.0);
      CHECK_THAT(g_alpha(a, k), WithinRel(I / (g * g), 1e-10));
    }
  }
  double prev = g_alpha(0.55, 1);
  for (int k = 2; k <= 20; ++k) {
    const double g = g_alpha(0.55, k);
    CHECK(g < prev);
    CHECK(g > 0.0);
    prev = g;
  }
  // Decay exponent alpha - 1.
  CHECK_THAT(g_alpha(0.55, 20000) / g_alpha(0.55, 10000), WithinRel(std::pow(2.0, -0.45), 1e-4));
  CHECK_THROWS_AS(g_alpha(0.5, 1), DomainError);
  CHECK_THROWS_AS(g_alpha(0.7, 0), DomainError);
}

TEST_CASE("zumbach_cov matches the exponential closed form at alpha = 1") {
  ModelParams p{0.5, 0.3, 0.45, -0.7};
  auto flat = ForwardVarianceCurve::flat(0.025);
  zlab::oracle::ExpOracle o{0.3L, 0.45L, -0.7L, 0.025L, 1.0L / 252};
  for (int k = 1; k <= 10; ++k) {
    CHECK_THAT(zumbach_cov(p, flat, 1.0, k, kDay), WithinRel(static_cast<double>(o.zumbach(k)), 1e-9));
  }
}

TEST_CASE("zumbach_cov matches brute-force nested quadrature") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  for (int k : {1, 3}) {
    CHECK_THAT(zumbach_cov(kBase, flat, 1.0, k, kDay), WithinRel(zumbach_brute_force(kBase, flat, 1.0, k, kDay), 1e-8));
  }
  // A day that straddles a knot of a piecewise-linear curve.
  auto c = bumpy_curve();
  for (double t : {1.002, 0.7}) {
    CHECK_THAT(zumbach_cov(kBase, c, t, 2, kDay), WithinRel(zumbach_brute_force(kBase, c, t, 2, kDay), 1e-8));
  }
  ModelParams p{0.3, 1.0, 0.45, 0.5};
  CHECK_THAT(zumbach_cov(p, c, 1.002, 1, 0.01), WithinRel(zumbach_brute_force(p, c, 1.002, 1, 0.01), 1e-8));
}

TEST_CASE("zumbach_cov degenerate cases, sign symmetry and positivity") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  CHECK(zumbach_cov({0.05, 0.3, 0.45, 0.0}, flat, 1.0, 1, kDay) == 0.0);
  CHECK(zumbach_cov({0.05, 0.3, 0.0, -0.7}, flat, 1.0, 1, kDay) == 0.0);
  CHECK(zumbach_asymptotic({0.05, 0.3, 0.45, 0.0}, flat, 1.0, 1, kDay) == 0.0);
  CHECK(zumbach_cov(kBase, flat, 1.0, 3, kDay) == zumbach_cov({0.05, 0.3, 0.45, 0.7}, flat, 1.0, 3, kDay));

  for (double H : {0.05, 0.2, 0.5}) {
    for (double l : {0.1, 1.0}) {
      for (double nu : {0.1, 1.0}) {
        for (double rho : {-0.9, 0.3}) {
          CHECK(zumbach_cov({H, l, nu, rho}, flat, 1.0, 2, kDay) > 0.0);
        }
      }
    }
  }
  CHECK_THROWS_AS(zumbach_cov(kBase, flat, 0.5 * kDay, 1, kDay), DomainError);
  CHECK_THROWS_AS(zumbach_cov(kBase, flat, 1.0, 0, kDay), DomainError);
  CHECK_THROWS_AS(zumbach_cov(kBase, flat, 1.0, 1, 0.0), DomainError);
}

TEST_CASE("flat curve: Z does not depend on t") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  for (int k : {1, 5}) CHECK_THAT(zumbach_cov(kBase, flat, 1.0, k, kDay), WithinRel(zumbach_cov(kBase, flat, 4.0, k, kDay), 1e-12));
}

TEST_CASE("asymptotic: closed form at alpha = 1, lambda independence, decay in k") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  const double expected = 2.0 * 0.315 * 0.315 * std::pow(kDay, 3.0) * 0.5 * 0.025;
  CHECK_THAT(zumbach_asymptotic({0.5, 0.3, 0.45, -0.7}, flat, 1.0, 4, kDay), WithinRel(expected, 1e-12));

  const double base = zumbach_asymptotic({0.05, 0.1, 0.45, -0.7}, flat, 1.0, 3, kDay);
  CHECK(zumbach_asymptotic({0.05, 0.3, 0.45, -0.7}, flat, 1.0, 3, kDay) == base);
  CHECK(zumbach_asymptotic({0.05, 1.0, 0.45, -0.7}, flat, 1.0, 3, kDay) == base);

  double prev = zumbach_asymptotic(kBase, flat, 1.0, 1, kDay);
  for (int k = 2; k <= 10; ++k) {
    const double z = zumbach_asymptotic(kBase, flat, 1.0, k, kDay);
    CHECK(z < prev);
    prev = z;
  }
  // Proportional to xi_0(t).
  auto c = bumpy_curve();
  CHECK_THAT(zumbach_asymptotic(kBase, c, 0.25, 2, kDay) / zumbach_asymptotic(kBase, flat, 0.25, 2, kDay),
             WithinRel(c(0.25) / 0.025, 1e-14));
}

TEST_CASE("exact Z approaches the asymptotic as delta shrinks") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  std::vector<double> deltas{1.0 / 252, 1e-3, 1e-4, 1e-5};
  double prev_gap = 1.0;
  for (double d : deltas) {
    const double gap = std::abs(zumbach_cov(kBase, flat, 1.0, 1, d) / zumbach_asymptotic(kBase, flat, 1.0, 1, d) - 1.0);
    CHECK(gap < prev_gap);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.05);

  // log-log slope 2 alpha + 1 over [1e-5, 1e-3].
  std::vector<double> x, y;
  for (double d = 1e-5; d <= 1.0001e-3; d *= std::pow(10.0, 0.25)) {
    x.push_back(std::log(d));
    y.push_back(std::log(zumbach_cov(kBase, flat, 1.0, 1, d)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / x.size(), my += y[i] / x.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxy += (x[i] - mx) * (y[i] - my), sxx += (x[i] - mx) * (x[i] - mx);
  CHECK_THAT(sxy / sxx, WithinAbs(2.0 * kBase.alpha() + 1.0, 0.02));
}

TEST_CASE("rough kernel makes the effect much larger than classical Heston") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  for (int k = 1; k <= 10; ++k) {
    CHECK(zumbach_cov(kBase, flat, 1.0, k, kDay) / zumbach_cov({0.5, 0.3, 0.45, -0.7}, flat, 1.0, k, kDay) > 10.0);
  }
}

TEST_CASE("variance of integrated variance") {
  ModelParams p{0.5, 0.3, 0.45, -0.7};
  auto flat = ForwardVarianceCurve::flat(0.025);
  zlab::oracle::ExpOracle o{0.3L, 0.45L, -0.7L, 0.025L, 1.0L / 252};
  for (double t : {kDay, 5 * kDay, 1.0, 4.0}) {
    CHECK_THAT(var_sigma2(p, flat, t, kDay), WithinRel(static_cast<double>(o.var_sigma2(t)), 1e-9));
  }
  CHECK(var_sigma2({0.05, 0.3, 0.0, -0.7}, flat, 1.0, kDay) == 0.0);
  CHECK(var_sigma2({0.05, 0.3, 0.5, -0.7}, flat, 1.0, kDay) > var_sigma2({0.05, 0.3, 0.4, -0.7}, flat, 1.0, kDay));

  // Brute force on the piecewise curve, straight from the formula.
  auto c = bumpy_curve();
  special::MittagLefflerLaw law(kBase.ml());
  boost::math::quadrature::tanh_sinh<double> ts;
  const double t = 1.002;
  auto carried = [&](double s) {
    const double dF = law.cdf(s + kDay) - law.cdf(s);
    return dF * dF * c(t - kDay - s);
  };
  std::vector<double> pts{0.0, kDay, 0.1, t - kDay - 0.5, t - kDay};
  double I = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) I += ts.integrate(carried, pts[i], pts[i + 1], 1e-12);
  std::vector<double> pts2{0.0, t - 1.0, kDay};
  for (std::size_t i = 0; i + 1 < pts2.size(); ++i)
    I += ts.integrate([&](double s) { const double F = law.cdf(s); return F * F * c(t - s); }, pts2[i], pts2[i + 1], 1e-12);
  const double nl = kBase.nu / kBase.lambda;
  CHECK_THAT(var_sigma2(kBase, c, t, kDay), WithinRel(nl * nl * I, 1e-8));
}

TEST_CASE("fourth moment of daily returns") {
  auto flat = ForwardVarianceCurve::flat(0.025);
  const double v = 0.025;
  CHECK_THAT(fourth_moment_r({0.05, 0.3, 0.0, -0.7}, flat, 1.0, kDay), WithinRel(3.0 * v * v * kDay * kDay, 1e-14));

  auto m = fourth_moment_terms({0.05, 0.3, 0.45, 0.0}, flat, 2.0, kDay);
  CHECK(m.leverage == 0.0);
  CHECK(m.carried > 0.0);

  auto full = fourth_moment_terms(kBase, flat, 2.0, kDay);
  CHECK_THAT(full.in_day + full.carried, WithinRel(3.0 * var_sigma2(kBase, flat, 2.0, kDay), 1e-12));
  CHECK(full.total() > 0.0);

  // Leverage term against its nested definition on a piecewise curve.
  auto c = bumpy_curve();
  const double t = 1.002;
  special::MittagLefflerLaw law(kBase.ml());
  boost::math::quadrature::tanh_sinh<double> ts(12);
  auto inner = [&](double x) {
    if (x <= 0.0) return 0.0;
    auto g = [&](double u) { return law.density(u) * c(t - kDay + x - u); };
    const double kink = t - kDay + x - 1.0;  // the knot at t = 1
    if (kink > 0.0 && kink < x) return ts.integrate(g, 0.0, kink, 1e-12) + ts.integrate(g, kink, x, 1e-12);
    return ts.integrate(g, 0.0, x, 1e-12);
  };
  const double split = 1.0 - (t - kDay);
  const double I = ts.integrate([&](double x) { return law.cdf(kDay - x) * inner(x); }, 0.0, split, 1e-11) +
                   ts.integrate([&](double x) { return law.cdf(kDay - x) * inner(x); }, split, kDay, 1e-11);
  const double nl = kBase.nu / kBase.lambda;
  const auto mc = fourth_moment_terms(kBase, c, t, kDay);
  CHECK_THAT(mc.leverage, WithinRel(12.0 * 0.49 * nl * nl * I, 1e-8));
  CHECK_THAT(mc.gaussian, WithinRel(3.0 * std::pow(c.integral(t - kDay, t), 2), 1e-14));
}

TEST_CASE("stationary limits") {
  ModelParams p{0.5, 0.3, 0.45, -0.7};
  zlab::oracle::ExpOracle o{0.3L, 0.45L, -0.7L, 0.025L, 1.0L / 252};
  CHECK_THAT(stationary_var_sigma2(p, 0.025, kDay), WithinRel(static_cast<double>(o.stationary_var()), 1e-9));
  CHECK(stationary_var_sigma2({0.05, 0.3, 0.0, -0.7}, 0.025, kDay) == 0.0);
  CHECK_THAT(stationary_fourth_moment_r({0.05, 0.3, 0.0, -0.7}, 0.025, kDay),
             WithinRel(3.0 * 0.025 * 0.025 * kDay * kDay, 1e-14));

  // Finite t approaches the limit.
  auto flat = ForwardVarianceCurve::flat(0.025);
  CHECK_THAT(var_sigma2(p, flat, 200.0, kDay), WithinRel(stationary_var_sigma2(p, 0.025, kDay), 1e-9));

  // Small-delta equivalents, in the regime where (lambda^{1/a} delta)^{2H} is small.
  ModelParams q{0.3, 0.3, 0.45, -0.7};
  CHECK_THAT(stationary_var_sigma2(q, 0.025, 1e-4) / stationary_var_sigma2_small_delta(q, 0.025, 1e-4), WithinAbs(1.0, 0.02));
  CHECK_THAT(stationary_fourth_moment_r(q, 0.025, 1e-4) / stationary_fourth_moment_small_delta(q, 0.025, 1e-4),
             WithinAbs(1.0, 0.02));
}

TEST_CASE("stationary limits converge slowly for very rough kernels") {
  // The correction to the small-delta equivalent scales like delta^{2H}: at
  // H = 0.05 it is still about 30% at delta = 1e-4, shrinking steadily.
  double prev = 0.0;
  for (double d : {1e-2, 1e-4, 1e-6}) {
    const double r = stationary_var_sigma2(kBase, 0.025, d) / stationary_var_sigma2_small_delta(kBase, 0.025, d);
    CHECK(r > prev);
    CHECK(r < 1.0);
    prev = r;
  }
  const double r4 = stationary_var_sigma2(kBase, 0.025, 1e-4) / stationary_var_sigma2_small_delta(kBase, 0.025, 1e-4);
  CHECK_THAT(r4, WithinAbs(0.68, 0.02));
}

TEST_CASE("Zumbach correlation") {
  CHECK(zumbach_correl({0.05, 0.3, 0.45, 0.0}, 0.025, 1, kDay).value == 0.0);
  CHECK_THROWS_AS(zumbach_correl({0.05, 0.3, 0.0, -0.7}, 0.025, 1, kDay), DomainError);

  auto c = zumbach_correl(kBase, 0.025, 1, kDay);
  CHECK(c.value > 0.0);
  CHECK(c.value < 1.0);
  CHECK(c.warnings.empty());
  CHECK(zumbach_correl(kBase, 0.025, 1, kDay).value / zumbach_correl({0.5, 0.3, 0.45, -0.7}, 0.025, 1, kDay).value > 10.0);

  // alpha = 1: the exact ratio approaches the small-delta equivalent.
  ModelParams p{0.5, 0.3, 0.45, -0.7};
  double prev = 1.0;
  for (double d : {1e-2, 1e-3, 1e-4}) {
    auto z = zumbach_correl(p, 0.025, 2, d);
    const double gap = std::abs(z.value / z.small_delta - 1.0);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-3);
}
