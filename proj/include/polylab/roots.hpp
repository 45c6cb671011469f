// Real roots of univariate polynomials on a bounded interval.
#pragma once

#include <vector>

namespace polylab {

// coeffs are lowest degree first. Returns the sorted sign-changing roots in
// [lo, hi]; roots of even multiplicity are reported when |p| at the local
// extremum is below touch_tol.
std::vector<double> real_roots(const std::vector<double>& coeffs, double lo, double hi, double touch_tol = 0.0);

double horner(const std::vector<double>& coeffs, double t);

// Strip trailing coefficients that are negligible relative to the largest.
std::vector<double> trim_coeffs(std::vector<double> coeffs, double rel = 1e-14);

}  // namespace polylab
