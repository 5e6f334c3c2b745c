#include "zlab/special.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>

#include "zlab/error.hpp"
#include "zlab/quadrature.hpp"

namespace zlab::special {

using detail::require;

void MlParams::validate() const {
  require(std::isfinite(alpha) && alpha > 0.5 && alpha <= 1.0,
          "Mittag-Leffler alpha must lie in (1/2, 1], got " + std::to_string(alpha));
  require(std::isfinite(lambda) && lambda > 0.0,
          "Mittag-Leffler lambda must be positive, got " + std::to_string(lambda));
}

// ---------------------------------------------------------------------------
// E_{alpha,beta}(-x)

namespace {

// Series coefficients are shared between instances: the convenience functions
// build a fresh object per call. Few distinct (alpha, beta) pairs occur in
// practice, so the cache is simply dropped when it grows large.
std::shared_ptr<const std::vector<long double>> coefficients(double alpha, double beta) {
  static std::mutex mutex;
  static std::map<std::pair<double, double>, std::shared_ptr<const std::vector<long double>>> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find({alpha, beta}); it != cache.end()) return it->second;
  }
  const auto n = static_cast<std::size_t>(std::ceil(200.0 / alpha)) + 60;
  auto coef = std::make_shared<std::vector<long double>>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const long double arg = static_cast<long double>(alpha) * k + beta;
    (*coef)[k] = arg < 1000.0L ? 1.0L / std::tgamma(arg) : std::exp(-std::lgamma(arg));
  }
  std::lock_guard lock(mutex);
  if (cache.size() >= 256) cache.clear();
  cache.emplace(std::make_pair(alpha, beta), coef);
  return coef;
}

}  // namespace

MittagLefflerNeg::MittagLefflerNeg(double alpha, double beta) : alpha_(alpha), beta_(beta) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0,
          "Mittag-Leffler alpha must lie in (0, 1], got " + std::to_string(alpha));
  require(beta == 1.0 || beta == 2.0 || beta == alpha,
          "Mittag-Leffler beta must be 1, 2 or alpha");
  coef_ = coefficients(alpha, beta);
  if (alpha < 1.0 && 1.0 - alpha < kNearOne) {
    const double a0 = 1.0 - 2.0 * kNearOne;
    anchor_ = std::make_shared<const MittagLefflerNeg>(a0, beta == alpha ? a0 : beta);
  }
}

double MittagLefflerNeg::operator()(double x) const {
  require(std::isfinite(x) && x >= 0.0, "Mittag-Leffler argument must be >= 0");
  if (x == 0.0) return static_cast<double>((*coef_)[0]);
  if (alpha_ == 1.0) {
    if (beta_ == 2.0) return -std::expm1(-x) / x;
    return std::exp(-x);
  }
  const double t = std::pow(x, 1.0 / alpha_);
  if (t <= kSeriesLimit) return series(x, false);
  if (anchor_) {
    const double at_one = beta_ == 2.0 ? -std::expm1(-x) / x : std::exp(-x);
    const double w = (1.0 - alpha_) / (1.0 - anchor_->alpha_);
    return at_one + w * ((*anchor_)(x)-at_one);
  }
  return laplace(x);
}

double MittagLefflerNeg::one_minus(double x) const {
  require(std::isfinite(x) && x >= 0.0, "Mittag-Leffler argument must be >= 0");
  if (x == 0.0) return 0.0;
  const double t = std::pow(x, 1.0 / alpha_);
  if (t <= kSeriesLimit) return series(x, true);
  return 1.0 - (*this)(x);
}

double MittagLefflerNeg::series(double x, bool drop_first) const {
  const long double z = -static_cast<long double>(x);
  // Terms grow until alpha k ~ x^{1/alpha}; only test for convergence past that.
  const auto peak = static_cast<std::size_t>(std::pow(x, 1.0 / alpha_) / alpha_) + 2;
  long double sum = 0.0L, comp = 0.0L, power = 1.0L;
  std::size_t k = 0;
  if (drop_first) {
    power = z;
    k = 1;
  }
  const auto& coef = *coef_;
  for (; k < coef.size(); ++k) {
    const long double term = coef[k] * power;
    const long double y = term - comp;
    const long double s = sum + y;
    comp = (s - sum) - y;
    sum = s;
    if (k > peak && std::fabs(term) <= 1e-22L * std::fabs(sum)) {
      return static_cast<double>(drop_first ? -sum : sum);
    }
    power *= z;
  }
  throw NumericalError("Mittag-Leffler series did not converge at x = " + std::to_string(x));
}

double MittagLefflerNeg::laplace(double x) const {
  const double a = alpha_;
  const double t = std::pow(x, 1.0 / a);
  const double c = std::cos(a * std::numbers::pi);
  const double sn = std::sin(a * std::numbers::pi);
  // Split the spectral integral where its denominator is smallest; this is
  // where K_a peaks, sharply so for alpha close to one.
  const bool at_root = c < 0.0 && std::pow(-c, 1.0 / a) >= 1e-2;
  const double rs = at_root ? std::pow(-c, 1.0 / a) : (c < 0.0 ? 1e-2 : 1.0);
  const double S = at_root ? -c : std::pow(rs, a);
  const double pref = sn / std::numbers::pi * S / a;
  // Denominators written as a square plus sn^2 so that nothing cancels when
  // alpha -> 1 (sn -> 0, c -> -1). With S = -c the squares vanish at v = 1.
  auto lower_den = [&](double v) {
    const double d = at_root ? S * (v - 1.0) : S * v + c;
    return d * d + sn * sn;
  };
  auto upper_den = [&](double v) {
    const double d = at_root ? (v - 1.0) + sn * sn : v + c * S;
    return d * d + S * S * sn * sn;
  };

  auto h = [&](double r) -> double {
    const double rt = r * t;
    if (!std::isfinite(rt) || rt > 745.0) {
      return beta_ == 2.0 && std::isfinite(rt) ? 1.0 / rt : 0.0;
    }
    if (beta_ == 1.0) return std::exp(-rt);
    if (beta_ == 2.0) return rt < 1e-300 ? 1.0 : -std::expm1(-rt) / rt;
    return std::pow(t, 1.0 - a) * r * std::exp(-rt);
  };
  // r = rs v^{1/a} on [0, rs] and r = rs v^{-1/a} on [rs, inf); both maps
  // turn the spectral integrand into a smooth function of v on [0, 1].
  auto lower = [&](double v) { return pref * h(rs * std::pow(v, 1.0 / a)) / lower_den(v); };
  auto upper = [&](double v) { return pref * h(rs * std::pow(v, -1.0 / a)) / upper_den(v); };

  std::vector<double> lo{0.0, 1.0}, hi{0.0, 1.0};
  for (double m : {0.25, 1.0, 4.0, 16.0, 64.0}) {
    const double v1 = std::pow(m / (rs * t), a);
    if (v1 > 0.0 && v1 < 1.0) lo.push_back(v1);
    const double v2 = std::pow(rs * t / m, a);
    if (v2 > 0.0 && v2 < 1.0) hi.push_back(v2);
  }
  for (double m : {1.0, 4.0}) {
    const double v = 1.0 - m * sn;
    if (v > 0.5 && v < 1.0) {
      lo.push_back(v);
      hi.push_back(v);
    }
  }
  std::sort(lo.begin(), lo.end());
  std::sort(hi.begin(), hi.end());

  quad::Options opt;
  opt.rel_tol = 1e-13;
  opt.max_intervals = 3000;
  const double first = quad::integrate_or_throw(lower, lo, opt, "Mittag-Leffler spectral integral");
  const double second = quad::integrate_or_throw(upper, hi, opt, "Mittag-Leffler spectral integral");
  return first + second;
}

// ---------------------------------------------------------------------------
// The Mittag-Leffler law

MittagLefflerLaw::MittagLefflerLaw(MlParams p)
    : p_((p.validate(), p)),
      scale_(std::pow(p.lambda, 1.0 / p.alpha)),
      e1_(p.alpha, 1.0),
      ea_(p.alpha, p.alpha),
      e2_(p.alpha, 2.0) {}

double MittagLefflerLaw::density(double x) const {
  require(std::isfinite(x) && x > 0.0, "Mittag-Leffler density needs x > 0");
  const double z = p_.lambda * std::pow(x, p_.alpha);
  return p_.lambda * std::pow(x, p_.alpha - 1.0) * ea_(z);
}

double MittagLefflerLaw::cdf(double x) const {
  require(std::isfinite(x) && x >= 0.0, "Mittag-Leffler cdf needs x >= 0");
  return e1_.one_minus(p_.lambda * std::pow(x, p_.alpha));
}

double MittagLefflerLaw::survival(double x) const {
  require(std::isfinite(x) && x >= 0.0, "Mittag-Leffler survival needs x >= 0");
  return e1_(p_.lambda * std::pow(x, p_.alpha));
}

double MittagLefflerLaw::cdf_integral(double x) const {
  require(std::isfinite(x) && x >= 0.0, "Mittag-Leffler cdf integral needs x >= 0");
  if (x == 0.0) return 0.0;
  return x * e2_.one_minus(p_.lambda * std::pow(x, p_.alpha));
}

double MittagLefflerLaw::cdf_increment(double x, double h) const {
  require(h >= 0.0, "cdf increment needs h >= 0");
  if (h == 0.0) return 0.0;
  if (x > 0.0 && h <= 1e-3 * x) {
    // Narrow window far from the origin: Simpson on the density is accurate
    // to O((h/x)^4) where differencing F would lose log10(x/h) digits.
    return h / 6.0 * (density(x) + 4.0 * density(x + 0.5 * h) + density(x + h));
  }
  const double f0 = cdf(x);
  if (f0 < 0.5) return cdf(x + h) - f0;
  return survival(x) - survival(x + h);
}

double MittagLefflerLaw::l2_norm_squared() const {
  const double a = p_.alpha;
  // Work with lambda = 1 and rescale: int f^2 = scale * int phi^2.
  auto phi = [&](double t) { return std::pow(t, a - 1.0) * ea_(std::pow(t, a)); };

  quad::Options opt;
  opt.rel_tol = 1e-12;
  // t = v^q with q = 1/(2a-1) absorbs the t^{2a-2} singularity at the origin.
  const double q = 1.0 / (2.0 * a - 1.0);
  auto head = [&](double v) {
    const double e = ea_(std::pow(v, q * a));
    return q * e * e;
  };
  double acc = quad::integrate_or_throw(head, 0.0, 1.0, opt, "l2 norm of the Mittag-Leffler density");

  // Doubling panels until the power-law tail f ~ C t^{-a-1} is negligible.
  double lo = 1.0;
  for (int panel = 0; panel < 200; ++panel) {
    const double hi = 2.0 * lo;
    acc += quad::integrate_or_throw([&](double t) { const double v = phi(t); return v * v; }, lo, hi,
                                    opt, "l2 norm of the Mittag-Leffler density");
    const double edge = phi(hi);
    const double tail = edge * edge * hi / (2.0 * a + 1.0);
    if (tail <= 1e-13 * acc) return scale_ * (acc + tail);
    lo = hi;
  }
  throw NumericalError("l2 norm of the Mittag-Leffler density: tail truncation failed");
}

// ---------------------------------------------------------------------------

double ml_neg(double alpha, double x) {
  require(std::isfinite(alpha) && alpha > 0.0 && alpha <= 1.0,
          "ml_neg: alpha must lie in (0, 1]");
  require(std::isfinite(x) && x >= 0.0, "ml_neg: x must be >= 0");
  return MittagLefflerNeg(alpha, 1.0)(x);
}

double ml_density(const MlParams& p, double x) { return MittagLefflerLaw(p).density(x); }

double ml_cdf(const MlParams& p, double x) { return MittagLefflerLaw(p).cdf(x); }

double l2_norm_f_squared(const MlParams& p) {
  p.validate();
  return MittagLefflerLaw(p).l2_norm_squared();
}

}  // namespace zlab::special
