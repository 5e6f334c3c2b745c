#include "zlab/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zlab/error.hpp"
#include "zlab/quadrature.hpp"

namespace zlab {

using detail::require;

void ModelParams::validate() const {
  require(std::isfinite(hurst) && hurst > 0.0 && hurst <= 0.5, "H must lie in (0, 1/2]");
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  require(std::isfinite(nu) && nu >= 0.0, "nu must be non-negative");
  require(std::isfinite(rho) && rho >= -1.0 && rho <= 1.0, "rho must lie in [-1, 1]");
}

namespace {

quad::Options outer_options() {
  quad::Options o;
  o.rel_tol = 1e-10;
  o.max_intervals = 4000;
  return o;
}

void check_day(double t, double delta) {
  require(std::isfinite(delta) && delta > 0.0, "delta must be positive");
  require(std::isfinite(t) && t >= delta * (1.0 - 1e-12), "t must be >= delta");
}

// Breakpoints on [a, b] that resolve algebraic behaviour at both endpoints.
std::vector<double> both_ends(double a, double b) {
  const double w = b - a;
  std::vector<double> pts{a};
  for (double e : {1e-12, 1e-9, 1e-6, 1e-3}) pts.push_back(a + e * w);
  pts.push_back(a + 0.5 * w);
  for (double e : {1e-3, 1e-6, 1e-9, 1e-12}) pts.push_back(b - e * w);
  pts.push_back(b);
  return pts;
}

// Merges extra breakpoints lying inside the current span and sorts.
void add_points(std::vector<double>& pts, const std::vector<double>& extra) {
  std::sort(pts.begin(), pts.end());
  const double a = pts.front(), b = pts.back();
  for (double x : extra)
    if (x > a && x < b) pts.push_back(x);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
}

// The Mittag-Leffler kernel together with the forward variance curve.
class Kernel {
 public:
  Kernel(const ModelParams& p, const ForwardVarianceCurve& xi) : law_(p.ml()), xi_(xi) {}

  const special::MittagLefflerLaw& law() const { return law_; }
  double F(double x) const { return x <= 0.0 ? 0.0 : law_.cdf(x); }

  // int_0^x f(u) xi_0(T0 + x - u) du, exact for a piecewise-linear curve:
  // on a linear piece xi = y_a + c (u - u_a) and
  // int_{u_a}^{u_b} (u - u_a) f(u) du = (u_b - u_a) F(u_b) - int_{u_a}^{u_b} F.
  double convolution(double T0, double x) const {
    if (x <= 0.0) return 0.0;
    if (xi_.is_flat()) return xi_.level() * law_.cdf(x);
    std::vector<double> us{0.0};
    for (double k : xi_.kinks(T0, T0 + x)) us.push_back(T0 + x - k);
    us.push_back(x);
    std::sort(us.begin(), us.end());
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < us.size(); ++i) {
      const double ua = us[i], ub = us[i + 1], w = ub - ua;
      if (w <= 0.0) continue;
      const double ya = xi_(T0 + x - ua), yb = xi_(T0 + x - ub);
      sum += ya * law_.cdf_increment(ua, w);
      if (yb != ya) {
        const double g = law_.cdf_integral(ub) - law_.cdf_integral(ua);
        sum += (yb - ya) / w * (w * law_.cdf(ub) - g);
      }
    }
    return sum;
  }

 private:
  special::MittagLefflerLaw law_;
  const ForwardVarianceCurve& xi_;
};

// Pieces of Var[sigma^2_t] / (nu/lambda)^2: noise from before the day and
// from inside it.
struct VarianceParts {
  double carried = 0.0;
  double in_day = 0.0;
};

VarianceParts variance_parts(const Kernel& K, const ForwardVarianceCurve& xi, double t, double delta) {
  VarianceParts out;
  const auto opt = outer_options();
  const double span = t - delta;
  if (span > 0.0) {
    auto pts = both_ends(0.0, std::min(span, delta));
    if (span > delta) {
      const auto tail = quad::geometric_breakpoints(delta, span, delta);
      pts.insert(pts.end(), tail.begin(), tail.end());
    }
    std::vector<double> knots;
    for (double k : xi.kinks(0.0, span)) knots.push_back(span - k);
    add_points(pts, knots);
    out.carried = quad::integrate_or_throw(
        [&](double s) {
          const double d = K.law().cdf_increment(s, delta);
          return d * d * xi(span - s);
        },
        pts, opt, "variance of integrated variance");
  }
  auto pts = both_ends(0.0, delta);
  std::vector<double> knots;
  for (double k : xi.kinks(span, t)) knots.push_back(t - k);
  add_points(pts, knots);
  out.in_day = quad::integrate_or_throw(
      [&](double s) {
        const double F = K.F(s);
        return F * F * xi(t - s);
      },
      pts, opt, "variance of integrated variance");
  return out;
}

// int_0^delta F(delta - x) int_0^x f(u) xi_0(t - delta + x - u) du dx
double leverage_integral(const Kernel& K, const ForwardVarianceCurve& xi, double t, double delta) {
  auto pts = both_ends(0.0, delta);
  std::vector<double> knots;
  for (double k : xi.kinks(t - delta, t)) knots.push_back(k - (t - delta));
  add_points(pts, knots);
  return quad::integrate_or_throw([&](double x) { return K.F(delta - x) * K.convolution(t - delta, x); },
                                  pts, outer_options(), "fourth moment of returns");
}

// int_0^inf (F(s + delta) - F(s))^2 ds with a power-law tail correction.
double stationary_carried(const ModelParams& p, const special::MittagLefflerLaw& law, double delta) {
  const auto opt = outer_options();
  auto sq = [&](double s) {
    const double d = law.cdf_increment(s, delta);
    return d * d;
  };
  double acc = quad::integrate_or_throw(sq, both_ends(0.0, delta), opt, "stationary variance");
  const double a = p.alpha();
  const double horizon = 50.0 / law.time_scale();
  double lo = delta;
  for (int panel = 0; panel < 400; ++panel) {
    const double hi = 2.0 * lo;
    acc += quad::integrate_or_throw(sq, lo, hi, opt, "stationary variance");
    const double tail = sq(hi) * hi / (2.0 * a + 1.0);
    if (hi > horizon && tail <= 1e-12 * acc) return acc + tail;
    lo = hi;
  }
  throw NumericalError("stationary variance: tail truncation failed");
}

double in_day_stationary(const special::MittagLefflerLaw& law, double delta) {
  return quad::integrate_or_throw(
      [&](double s) {
        const double F = law.cdf(s);
        return F * F;
      },
      both_ends(0.0, delta), outer_options(), "stationary variance");
}

}  // namespace

double g0(const ModelParams& p, const ForwardVarianceCurve& xi, double t) {
  p.validate();
  require(std::isfinite(t) && t >= 0.0, "g0 needs t >= 0");
  if (t == 0.0) return xi(0.0);
  const double a = p.alpha();
  if (xi.is_flat()) return xi.level() * (1.0 + p.lambda * std::pow(t, a) / std::tgamma(a + 1.0));
  // On a linear piece [s_a, s_b], with u = t - s,
  // int (t-s)^{a-1} (y_a + c (s - s_a)) ds = (y_a + c (t - s_a)) [u^a / a] - c [u^{a+1} / (a+1)].
  std::vector<double> pts{0.0};
  for (double k : xi.kinks(0.0, t)) pts.push_back(k);
  pts.push_back(t);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double sa = pts[i], sb = pts[i + 1];
    const double ya = xi(sa), c = (xi(sb) - ya) / (sb - sa);
    const double ua = t - sa, ub = t - sb;
    sum += (ya + c * (t - sa)) * (std::pow(ua, a) - std::pow(ub, a)) / a -
           c * (std::pow(ua, a + 1.0) - std::pow(ub, a + 1.0)) / (a + 1.0);
  }
  return xi(t) + p.lambda / std::tgamma(a) * sum;
}

double zumbach_cov(const ModelParams& p, const ForwardVarianceCurve& xi, double t, int k, double delta) {
  p.validate();
  check_day(t, delta);
  require(k >= 1, "lag k must be >= 1");
  if (p.rho == 0.0 || p.nu == 0.0) return 0.0;
  Kernel K(p, xi);
  const double lag = (k - 1) * delta;
  auto pts = both_ends(0.0, delta);
  std::vector<double> knots;
  for (double kt : xi.kinks(t - delta, t)) knots.push_back(t - kt);
  add_points(pts, knots);
  const double I = quad::integrate_or_throw(
      [&](double s) { return K.law().cdf_increment(s + lag, delta) * K.convolution(t - delta, delta - s); },
      pts, outer_options(), "Zumbach covariance");
  const double c = p.rho * p.nu / p.lambda;
  return 2.0 * c * c * I;
}

double g_alpha(double alpha, int k) {
  require(std::isfinite(alpha) && alpha > 0.5 && alpha <= 1.0, "g_alpha needs alpha in (1/2, 1]");
  require(k >= 1, "g_alpha needs k >= 1");
  auto diff = [alpha](double x) {
    // (x + 1)^a - x^a without cancellation for large x
    if (x <= 0.5) return std::pow(x + 1.0, alpha) - std::pow(x, alpha);
    return std::pow(x, alpha) * std::expm1(alpha * std::log1p(1.0 / x));
  };
  quad::Options opt;
  opt.rel_tol = 1e-13;
  const double I = quad::integrate_or_throw(
      [&](double s) { return diff(k - 1 + s) * std::pow(1.0 - s, alpha); }, both_ends(0.0, 1.0), opt, "g_alpha");
  const double g = std::tgamma(alpha + 1.0);
  return I / (g * g);
}

double zumbach_asymptotic(const ModelParams& p, const ForwardVarianceCurve& xi, double t, int k, double delta) {
  p.validate();
  check_day(t, delta);
  require(k >= 1, "lag k must be >= 1");
  if (p.rho == 0.0 || p.nu == 0.0) return 0.0;
  const double a = p.alpha();
  const double c = p.rho * p.nu;
  return 2.0 * c * c * std::pow(delta, 2.0 * a + 1.0) * g_alpha(a, k) * xi(t);
}

ZumbachCurve zumbach_curve(const ModelParams& p, const ForwardVarianceCurve& xi, double t,
                           const std::vector<int>& lags, double delta) {
  ZumbachCurve out;
  out.delta = delta;
  out.t = t;
  out.lags = lags;
  for (int k : lags) {
    out.values.push_back(zumbach_cov(p, xi, t, k, delta));
    out.asymptotic.push_back(zumbach_asymptotic(p, xi, t, k, delta));
  }
  return out;
}

double var_sigma2(const ModelParams& p, const ForwardVarianceCurve& xi, double t, double delta) {
  p.validate();
  check_day(t, delta);
  if (p.nu == 0.0) return 0.0;
  Kernel K(p, xi);
  const auto parts = variance_parts(K, xi, t, delta);
  const double c = p.nu / p.lambda;
  return c * c * (parts.carried + parts.in_day);
}

FourthMoment fourth_moment_terms(const ModelParams& p, const ForwardVarianceCurve& xi, double t, double delta) {
  p.validate();
  check_day(t, delta);
  FourthMoment m;
  const double mean = xi.integral(t - delta, t);
  m.gaussian = 3.0 * mean * mean;
  if (p.nu == 0.0) return m;
  Kernel K(p, xi);
  const double c2 = (p.nu / p.lambda) * (p.nu / p.lambda);
  const auto parts = variance_parts(K, xi, t, delta);
  m.carried = 3.0 * c2 * parts.carried;
  m.in_day = 3.0 * c2 * parts.in_day;
  if (p.rho != 0.0) m.leverage = 12.0 * p.rho * p.rho * c2 * leverage_integral(K, xi, t, delta);
  return m;
}

double fourth_moment_r(const ModelParams& p, const ForwardVarianceCurve& xi, double t, double delta) {
  return fourth_moment_terms(p, xi, t, delta).total();
}

double stationary_var_sigma2(const ModelParams& p, double xi_inf, double delta) {
  p.validate();
  require(std::isfinite(xi_inf) && xi_inf > 0.0, "xi_inf must be positive");
  require(std::isfinite(delta) && delta > 0.0, "delta must be positive");
  if (p.nu == 0.0) return 0.0;
  special::MittagLefflerLaw law(p.ml());
  const double c = p.nu / p.lambda;
  return c * c * xi_inf * (stationary_carried(p, law, delta) + in_day_stationary(law, delta));
}

FourthMoment stationary_fourth_moment_terms(const ModelParams& p, double xi_inf, double delta) {
  p.validate();
  require(std::isfinite(xi_inf) && xi_inf > 0.0, "xi_inf must be positive");
  require(std::isfinite(delta) && delta > 0.0, "delta must be positive");
  FourthMoment m;
  m.gaussian = 3.0 * xi_inf * xi_inf * delta * delta;
  if (p.nu == 0.0) return m;
  special::MittagLefflerLaw law(p.ml());
  const double c2 = (p.nu / p.lambda) * (p.nu / p.lambda);
  m.carried = 3.0 * c2 * xi_inf * stationary_carried(p, law, delta);
  m.in_day = 3.0 * c2 * xi_inf * in_day_stationary(law, delta);
  if (p.rho != 0.0) {
    const double I = quad::integrate_or_throw([&](double x) { return law.cdf(delta - x) * law.cdf(x); },
                                              both_ends(0.0, delta), outer_options(), "stationary fourth moment");
    m.leverage = 12.0 * p.rho * p.rho * c2 * xi_inf * I;
  }
  return m;
}

double stationary_fourth_moment_r(const ModelParams& p, double xi_inf, double delta) {
  return stationary_fourth_moment_terms(p, xi_inf, delta).total();
}

double stationary_var_sigma2_small_delta(const ModelParams& p, double xi_inf, double delta) {
  p.validate();
  if (p.nu == 0.0) return 0.0;
  const double c = p.nu / p.lambda;
  return c * c * xi_inf * delta * delta * special::l2_norm_f_squared(p.ml());
}

double stationary_fourth_moment_small_delta(const ModelParams& p, double xi_inf, double delta) {
  return 3.0 * xi_inf * xi_inf * delta * delta + 3.0 * stationary_var_sigma2_small_delta(p, xi_inf, delta);
}

ZumbachCorrel zumbach_correl(const ModelParams& p, double xi_inf, int k, double delta) {
  p.validate();
  require(p.nu > 0.0, "Zumbach correlation is undefined for nu = 0 (zero variance of sigma^2)");
  require(std::isfinite(xi_inf) && xi_inf > 0.0, "xi_inf must be positive");
  require(k >= 1, "lag k must be >= 1");
  ZumbachCorrel out;
  const auto flat = ForwardVarianceCurve::flat(xi_inf);
  out.cov = zumbach_cov(p, flat, delta, k, delta);
  out.var_sigma2 = stationary_var_sigma2(p, xi_inf, delta);
  const double mean_r2 = xi_inf * delta;
  out.var_r2 = stationary_fourth_moment_r(p, xi_inf, delta) - mean_r2 * mean_r2;
  if (!(out.var_sigma2 > 0.0) || !(out.var_r2 > 0.0))
    throw NumericalError("Zumbach correlation: non-positive variance in the denominator");
  out.value = out.cov / std::sqrt(out.var_sigma2 * out.var_r2);

  // Z ~ 2 (rho nu)^2 delta^{2a+1} g_a(k) xi, Var sigma^2 ~ (nu/l)^2 xi delta^2 L,
  // Var r^2 ~ 2 xi^2 delta^2 + 3 (nu/l)^2 xi delta^2 L with L = int f^2.
  const double a = p.alpha();
  const double L = special::l2_norm_f_squared(p.ml());
  const double c = p.nu / p.lambda;
  const double rn = p.rho * p.nu;
  out.small_delta = 2.0 * rn * rn * std::pow(delta, 2.0 * a - 1.0) * g_alpha(a, k) /
                    (c * std::sqrt(L) * std::sqrt(2.0 * xi_inf + 3.0 * c * c * L));

  if (std::abs(out.value) > 1.0)
    out.warnings.push_back("Zumbach correlation " + std::to_string(out.value) + " lies outside [-1, 1]");
  return out;
}

}  // namespace zlab
