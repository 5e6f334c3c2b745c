#pragma once

// Analytic quantities of the rough Heston model
//
//   dS/S = sqrt(V) dW,   V_t = xi_0(t) + int_0^t f^{a,l}(t-s) (nu/l) sqrt(V_s) dB_s,
//
// with d<W,B> = rho dt and f^{a,l} the Mittag-Leffler density, a = H + 1/2.
// All times are in years; r_t and sigma^2_t are the return and integrated
// variance over the day (t - delta, t].
//
// Every formula below is reduced to one-dimensional integrals of F and
// G = int F, which are evaluated in closed form; the remaining outer
// integrals run through adaptive Gauss-Kronrod with a relative tolerance.

#include <string>
#include <vector>

#include "zlab/curve.hpp"
#include "zlab/special.hpp"

namespace zlab {

inline constexpr double kTradingDay = 1.0 / 252.0;

struct ModelParams {
  double hurst = 0.05;   // H in (0, 1/2]
  double lambda = 0.3;   // mean reversion, 1/year
  double nu = 0.45;      // vol of vol; 0 gives a deterministic variance
  double rho = -0.7;     // spot/vol correlation in [-1, 1]

  double alpha() const { return hurst + 0.5; }
  special::MlParams ml() const { return {alpha(), lambda}; }
  void validate() const;
};

// g_0(t) = xi_0(t) + lambda/Gamma(a) int_0^t (t-s)^{a-1} xi_0(s) ds.
double g0(const ModelParams& p, const ForwardVarianceCurve& xi, double t);

// Z_t(k) = Cov[r_t^2, sigma^2_{t+k delta}] - Cov[r_{t+k delta}^2, sigma^2_t].
double zumbach_cov(const ModelParams& p, const ForwardVarianceCurve& xi, double t, int k,
                   double delta = kTradingDay);

// g_a(k) = 1/Gamma(a+1)^2 int_0^1 ((k+s)^a - (k+s-1)^a) (1-s)^a ds.
double g_alpha(double alpha, int k);

// Small-delta equivalent 2 (rho nu)^2 delta^{2a+1} g_a(k) xi_0(t).
double zumbach_asymptotic(const ModelParams& p, const ForwardVarianceCurve& xi, double t, int k,
                          double delta = kTradingDay);

struct ZumbachCurve {
  double delta = kTradingDay;
  double t = 0.0;
  std::vector<int> lags;
  std::vector<double> values;
  std::vector<double> asymptotic;
};

ZumbachCurve zumbach_curve(const ModelParams& p, const ForwardVarianceCurve& xi, double t,
                           const std::vector<int>& lags, double delta = kTradingDay);

double var_sigma2(const ModelParams& p, const ForwardVarianceCurve& xi, double t,
                  double delta = kTradingDay);

// E[r_t^4] split into its four contributions.
struct FourthMoment {
  double leverage = 0.0;   // 12 rho^2 (nu/l)^2 int_0^delta F(delta-x) int_0^x f(u) xi(.) du dx
  double gaussian = 0.0;   // 3 (int_{t-delta}^t xi_0)^2
  double in_day = 0.0;     // variance of sigma^2_t driven by noise inside the day, times 3
  double carried = 0.0;    // same for noise before the day, times 3
  double total() const { return leverage + gaussian + in_day + carried; }
};

FourthMoment fourth_moment_terms(const ModelParams& p, const ForwardVarianceCurve& xi, double t,
                                 double delta = kTradingDay);
double fourth_moment_r(const ModelParams& p, const ForwardVarianceCurve& xi, double t,
                       double delta = kTradingDay);

// t -> infinity limits for a curve that settles at xi_inf.
double stationary_var_sigma2(const ModelParams& p, double xi_inf, double delta = kTradingDay);
FourthMoment stationary_fourth_moment_terms(const ModelParams& p, double xi_inf,
                                            double delta = kTradingDay);
double stationary_fourth_moment_r(const ModelParams& p, double xi_inf, double delta = kTradingDay);

// Leading small-delta behaviour of the two limits above.
double stationary_var_sigma2_small_delta(const ModelParams& p, double xi_inf, double delta);
double stationary_fourth_moment_small_delta(const ModelParams& p, double xi_inf, double delta);

struct ZumbachCorrel {
  double value = 0.0;        // Z / sqrt(Var[sigma^2] Var[r^2]), stationary
  double small_delta = 0.0;  // its small-delta equivalent
  double cov = 0.0;
  double var_sigma2 = 0.0;
  double var_r2 = 0.0;
  std::vector<std::string> warnings;
};

ZumbachCorrel zumbach_correl(const ModelParams& p, double xi_inf, int k, double delta = kTradingDay);

}  // namespace zlab
