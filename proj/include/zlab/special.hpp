#pragma once

// Mittag-Leffler function on the negative real axis and the Mittag-Leffler
// probability law f^{alpha,lambda} / F^{alpha,lambda} built from it.
//
//   E_{a,b}(-x)        = sum_k (-x)^k / Gamma(a k + b)
//   f^{a,l}(x)         = l x^{a-1} E_{a,a}(-l x^a)          (density)
//   F^{a,l}(x)         = 1 - E_{a,1}(-l x^a)                (cdf)
//   int_0^x F^{a,l}    = x (1 - E_{a,2}(-l x^a))
//
// Small arguments are summed as a power series in extended precision. Large
// arguments use the Laplace-transform representation
//
//   E_a(-t^a) = int_0^inf exp(-r t) K_a(r) dr,
//   K_a(r)    = sin(a pi)/pi * r^{a-1} / (r^{2a} + 2 r^a cos(a pi) + 1),
//
// whose integrand is positive, so nothing cancels however large t gets.
// a == 1 is handled in closed form.

#include <memory>
#include <vector>

namespace zlab::special {

struct MlParams {
  double alpha = 1.0;   // (1/2, 1]
  double lambda = 1.0;  // > 0, 1/year

  void validate() const;
};

// E_{alpha,beta}(-x) for a fixed (alpha, beta), beta restricted to the three
// values the density/cdf pair needs: 1, alpha and 2.
class MittagLefflerNeg {
 public:
  MittagLefflerNeg(double alpha, double beta);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

  // E_{alpha,beta}(-x), x >= 0.
  double operator()(double x) const;

  // 1 - E_{alpha,beta}(-x); only meaningful for beta in {1, 2} where the
  // leading series coefficient is exactly one. Accurate for tiny x.
  double one_minus(double x) const;

  // Arguments with x^{1/alpha} up to this value are summed as a series.
  static constexpr double kSeriesLimit = 4.0;

  // Within this distance of alpha = 1 the spectral kernel is too narrow to
  // integrate; values are interpolated linearly in alpha between alpha = 1 and
  // an anchor at 1 - 2 kNearOne, which is accurate to O(kNearOne^2).
  static constexpr double kNearOne = 1e-8;

 private:
  double series(double x, bool drop_first) const;
  double laplace(double x) const;

  double alpha_;
  double beta_;
  std::shared_ptr<const std::vector<long double>> coef_;  // 1 / Gamma(alpha k + beta), shared per (alpha, beta)
  std::shared_ptr<const MittagLefflerNeg> anchor_;
};

// The Mittag-Leffler law with parameters (alpha, lambda).
class MittagLefflerLaw {
 public:
  explicit MittagLefflerLaw(MlParams p);

  const MlParams& params() const { return p_; }

  double density(double x) const;        // f, x > 0
  double cdf(double x) const;            // F, x >= 0
  double survival(double x) const;       // 1 - F, x >= 0
  double cdf_integral(double x) const;   // int_0^x F(s) ds, x >= 0

  // F(x + h) - F(x) without the cancellation of the naive difference.
  double cdf_increment(double x, double h) const;

  // int_0^inf f(s)^2 ds, finite for alpha > 1/2.
  double l2_norm_squared() const;

  // lambda^{1/alpha}: f^{a,l}(x) = scale * f^{a,1}(scale * x).
  double time_scale() const { return scale_; }

 private:
  MlParams p_;
  double scale_;
  MittagLefflerNeg e1_;
  MittagLefflerNeg ea_;
  MittagLefflerNeg e2_;
};

double ml_neg(double alpha, double x);
double ml_density(const MlParams& p, double x);
double ml_cdf(const MlParams& p, double x);
double l2_norm_f_squared(const MlParams& p);

}  // namespace zlab::special
