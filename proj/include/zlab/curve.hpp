#pragma once

#include <string>
#include <utility>
#include <vector>

namespace zlab {

// Forward variance curve xi_0(t) = E[V_t], variance per year.
//
// Either flat, or piecewise linear through ascending knots (t_i, xi_i) and
// constant beyond the first and last knot.
class ForwardVarianceCurve {
 public:
  struct Knot {
    double t;
    double xi;
  };

  static ForwardVarianceCurve flat(double level);
  static ForwardVarianceCurve piecewise_linear(std::vector<Knot> knots);

  // Reads "t,xi" rows. Blank lines and '#' comments are skipped; a first row
  // that does not parse as numbers is taken as a header.
  static ForwardVarianceCurve load(const std::string& path);

  bool is_flat() const { return knots_.size() == 1; }
  double level() const;  // flat curves only
  const std::vector<Knot>& knots() const { return knots_; }

  double operator()(double t) const;

  // int_a^b xi_0(s) ds, 0 <= a <= b.
  double integral(double a, double b) const;

  // Knot times strictly inside (a, b); the curve is linear between them.
  std::vector<double> kinks(double a, double b) const;

  // Lower and upper bounds of xi_0 over the whole half line.
  std::pair<double, double> range() const;

 private:
  explicit ForwardVarianceCurve(std::vector<Knot> knots) : knots_(std::move(knots)) {}

  // A single knot means flat.
  std::vector<Knot> knots_;
};

}  // namespace zlab
