#pragma once

// Globally adaptive 21-point Gauss-Kronrod integration (QAG/QAGP style).
//
// The driver keeps every subinterval in a max-heap keyed on its error
// estimate and bisects the worst one until the summed estimate drops below
// max(abs_tol, rel_tol * |I|). Initial breakpoints let callers seed the heap
// with the known structure of an integrand (kinks, scale changes, endpoint
// singularities), which is usually far cheaper than letting bisection find
// it.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "zlab/error.hpp"

namespace zlab::quad {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 0.0;
  int max_intervals = 4000;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  int evaluations = 0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk21(F& f, double a, double b) {
  using Kronrod = boost::math::quadrature::gauss_kronrod<double, 21>;
  using Gauss = boost::math::quadrature::gauss<double, 10>;
  const auto& x = Kronrod::abscissa();
  const auto& wk = Kronrod::weights();
  const auto& wg = Gauss::weights();

  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  const double fc = f(center);
  double kron = fc * wk[0];
  double gauss = 0.0;
  double abs_sum = std::abs(fc) * wk[0];
  std::array<double, 21> fv{};
  fv[0] = fc;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double dx = half * x[i];
    const double f1 = f(center - dx);
    const double f2 = f(center + dx);
    fv[2 * i - 1] = f1;
    fv[2 * i] = f2;
    kron += wk[i] * (f1 + f2);
    abs_sum += wk[i] * (std::abs(f1) + std::abs(f2));
    if (i % 2 == 1) gauss += wg[i / 2] * (f1 + f2);
  }
  const double mean = 0.5 * kron;
  double asc = wk[0] * std::abs(fc - mean);
  for (std::size_t i = 1; i < x.size(); ++i)
    asc += wk[i] * (std::abs(fv[2 * i - 1] - mean) + std::abs(fv[2 * i] - mean));

  const double result = kron * half;
  const double resabs = abs_sum * std::abs(half);
  const double resasc = asc * std::abs(half);
  double err = std::abs((kron - gauss) * half);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(50.0 * eps * resabs, err);
  if (!std::isfinite(result)) err = std::numeric_limits<double>::infinity();
  return {a, b, result, err};
}

}  // namespace detail

// Integrates f over [points.front(), points.back()], seeding the adaptive
// heap with the intervals between consecutive points.
template <class F>
Result integrate(F&& f, std::span<const double> points, const Options& opt = {}) {
  Result out;
  if (points.size() < 2) {
    out.converged = true;
    return out;
  }
  std::priority_queue<detail::Segment> heap;
  double total = 0.0, total_err = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (!(points[i + 1] > points[i])) continue;
    auto s = detail::gk21(f, points[i], points[i + 1]);
    out.evaluations += 21;
    total += s.value;
    total_err += s.error;
    heap.push(s);
  }
  const double tiny = 100.0 * std::numeric_limits<double>::epsilon();
  while (!heap.empty()) {
    const double target = std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
    if (total_err <= target) {
      out.converged = true;
      break;
    }
    if (static_cast<int>(heap.size()) >= opt.max_intervals) break;
    auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (std::abs(worst.b - worst.a) <= tiny * std::max(std::abs(worst.a), std::abs(worst.b))) {
      // Cannot bisect further; accept the remaining error if everything else is fine.
      break;
    }
    heap.pop();
    auto left = detail::gk21(f, worst.a, mid);
    auto right = detail::gk21(f, mid, worst.b);
    out.evaluations += 42;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum from scratch to shed accumulated cancellation in the running totals.
  double sum = 0.0, err = 0.0;
  out.intervals = static_cast<int>(heap.size());
  while (!heap.empty()) {
    sum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = sum;
  out.abs_error = err;
  if (!out.converged) out.converged = err <= std::max(opt.abs_tol, opt.rel_tol * std::abs(sum));
  if (!std::isfinite(sum)) out.converged = false;
  return out;
}

template <class F>
Result integrate(F&& f, double a, double b, const Options& opt = {}) {
  const double pts[2] = {a, b};
  return integrate(std::forward<F>(f), std::span<const double>(pts, 2), opt);
}

// Same as integrate() but throws NumericalError when the tolerance is not met.
template <class F>
double integrate_or_throw(F&& f, std::span<const double> points, const Options& opt,
                          const char* what) {
  auto r = integrate(std::forward<F>(f), points, opt);
  if (!r.converged)
    throw NumericalError(std::string(what) + ": adaptive quadrature did not converge (estimate " +
                         std::to_string(r.value) + ", error " + std::to_string(r.abs_error) + ")");
  return r.value;
}

template <class F>
double integrate_or_throw(F&& f, double a, double b, const Options& opt, const char* what) {
  const double pts[2] = {a, b};
  return integrate_or_throw(std::forward<F>(f), std::span<const double>(pts, 2), opt, what);
}

// Breakpoints a, a+h, a+2h, a+4h, ... clipped to b. Resolves integrands whose
// structure lives on the scale h near a but which extend over a much longer
// range.
inline std::vector<double> geometric_breakpoints(double a, double b, double h) {
  std::vector<double> pts{a};
  double w = h;
  while (a + w < b) {
    pts.push_back(a + w);
    w *= 2.0;
  }
  pts.push_back(b);
  return pts;
}

}  // namespace zlab::quad
