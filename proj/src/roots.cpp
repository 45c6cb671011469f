#include "polylab/roots.hpp"

#include <algorithm>
#include <cmath>

namespace polylab {

double horner(const std::vector<double>& c, double t) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * t + *it;
  return acc;
}

std::vector<double> trim_coeffs(std::vector<double> c, double rel) {
  double m = 0.0;
  for (double v : c) m = std::max(m, std::abs(v));
  while (c.size() > 1 && std::abs(c.back()) <= rel * m) c.pop_back();
  return c;
}

namespace {

// Root of a monotone piece with f(a), f(b) of opposite sign.
double bisect(const std::vector<double>& c, double a, double b, double fa) {
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    double fm = horner(c, m);
    if (fm == 0.0) return m;
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

std::vector<double> roots_rec(const std::vector<double>& c, double lo, double hi, double touch_tol) {
  std::vector<double> out;
  const std::size_t n = c.size();
  if (n <= 1) return out;
  if (n == 2) {
    double r = -c[0] / c[1];
    if (r >= lo && r <= hi) out.push_back(r);
    return out;
  }
  std::vector<double> d(n - 1);
  for (std::size_t i = 1; i < n; ++i) d[i - 1] = c[i] * static_cast<double>(i);
  std::vector<double> crit = roots_rec(trim_coeffs(d), lo, hi, 0.0);
  std::vector<double> knots;
  knots.push_back(lo);
  for (double x : crit)
    if (x > lo && x < hi) knots.push_back(x);
  knots.push_back(hi);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    double a = knots[i], b = knots[i + 1];
    double fa = horner(c, a), fb = horner(c, b);
    if (fa == 0.0) {
      out.push_back(a);
      continue;
    }
    if (fb == 0.0) continue;  // picked up as the next piece's left end
    if ((fa < 0) != (fb < 0)) out.push_back(bisect(c, a, b, fa));
  }
  if (std::abs(horner(c, hi)) == 0.0) out.push_back(hi);
  if (touch_tol > 0.0) {
    for (double x : crit) {
      if (x <= lo || x >= hi) continue;
      if (std::abs(horner(c, x)) <= touch_tol) out.push_back(x);
    }
  }
  std::sort(out.begin(), out.end());
  std::vector<double> uniq;
  for (double x : out)
    if (uniq.empty() || x - uniq.back() > 1e-14 * (1.0 + std::abs(x))) uniq.push_back(x);
  return uniq;
}

}  // namespace

std::vector<double> real_roots(const std::vector<double>& coeffs, double lo, double hi, double touch_tol) {
  auto c = trim_coeffs(coeffs);
  bool all_zero = std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
  if (all_zero) return {};
  return roots_rec(c, lo, hi, touch_tol);
}

}  // namespace polylab
