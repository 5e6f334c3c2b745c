#include "zlab/curve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "zlab/error.hpp"

namespace zlab {

using detail::require;

ForwardVarianceCurve ForwardVarianceCurve::flat(double level) {
  require(std::isfinite(level) && level > 0.0, "forward variance level must be positive");
  return ForwardVarianceCurve({{0.0, level}});
}

ForwardVarianceCurve ForwardVarianceCurve::piecewise_linear(std::vector<Knot> knots) {
  require(!knots.empty(), "forward variance curve needs at least one knot");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    require(std::isfinite(knots[i].t) && knots[i].t >= 0.0, "forward variance knot times must be >= 0");
    require(std::isfinite(knots[i].xi) && knots[i].xi > 0.0, "forward variance knot values must be positive");
    if (i > 0) require(knots[i].t > knots[i - 1].t, "forward variance knot times must be strictly increasing");
  }
  return ForwardVarianceCurve(std::move(knots));
}

ForwardVarianceCurve ForwardVarianceCurve::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open forward variance file '" + path + "'");
  std::vector<Knot> knots;
  std::string line;
  std::size_t lineno = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    Knot k{};
    std::string rest;
    if (!(row >> k.t >> k.xi) || (row >> rest)) {
      if (header_allowed) {
        header_allowed = false;
        continue;
      }
      throw ParseError("expected 't,xi' in forward variance file '" + path + "'", lineno);
    }
    header_allowed = false;
    knots.push_back(k);
  }
  if (knots.empty()) throw ParseError("forward variance file '" + path + "' has no knots", lineno);
  try {
    return piecewise_linear(std::move(knots));
  } catch (const DomainError& e) {
    throw ParseError(e.what(), lineno);
  }
}

double ForwardVarianceCurve::level() const {
  require(is_flat(), "level() is only defined for a flat curve");
  return knots_.front().xi;
}

double ForwardVarianceCurve::operator()(double t) const {
  require(t >= 0.0, "forward variance evaluated at negative time");
  if (t <= knots_.front().t) return knots_.front().xi;
  if (t >= knots_.back().t) return knots_.back().xi;
  auto hi = std::upper_bound(knots_.begin(), knots_.end(), t, [](double v, const Knot& k) { return v < k.t; });
  auto lo = hi - 1;
  const double w = (t - lo->t) / (hi->t - lo->t);
  return lo->xi + w * (hi->xi - lo->xi);
}

double ForwardVarianceCurve::integral(double a, double b) const {
  require(0.0 <= a && a <= b, "forward variance integral needs 0 <= a <= b");
  if (is_flat()) return knots_.front().xi * (b - a);
  // Trapezoids are exact on every linear piece.
  std::vector<double> pts{a};
  for (double k : kinks(a, b)) pts.push_back(k);
  pts.push_back(b);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    sum += 0.5 * (pts[i + 1] - pts[i]) * ((*this)(pts[i]) + (*this)(pts[i + 1]));
  return sum;
}

std::vector<double> ForwardVarianceCurve::kinks(double a, double b) const {
  std::vector<double> out;
  if (is_flat()) return out;
  for (const auto& k : knots_)
    if (k.t > a && k.t < b) out.push_back(k.t);
  return out;
}

std::pair<double, double> ForwardVarianceCurve::range() const {
  auto [lo, hi] = std::minmax_element(knots_.begin(), knots_.end(),
                                      [](const Knot& x, const Knot& y) { return x.xi < y.xi; });
  return {lo->xi, hi->xi};
}

}  // namespace zlab
