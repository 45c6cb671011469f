// Dense real multivariate polynomials in up to three variables.
#pragma once

#include <array>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "polylab/common.hpp"

namespace polylab {

using Exponent = std::array<int, 3>;

// Graded lexicographic order: total degree first, then lexicographic.
struct GradedLex {
  bool operator()(const Exponent& a, const Exponent& b) const {
    int da = a[0] + a[1] + a[2], db = b[0] + b[1] + b[2];
    if (da != db) return da < db;
    return a > b;
  }
};

using TermMap = std::map<Exponent, double, GradedLex>;

class Polynomial {
 public:
  Polynomial() : Polynomial(1) {}
  explicit Polynomial(int num_vars);
  Polynomial(int num_vars, TermMap terms);

  static Polynomial constant(int num_vars, double c);
  static Polynomial variable(int num_vars, int i);
  static Polynomial monomial(int num_vars, const Exponent& e, double c = 1.0);
  // Random dense polynomial with standard normal coefficients.
  static Polynomial random(int num_vars, int degree, Rng& rng);

  int num_vars() const { return nvars_; }
  int degree() const { return degree_; }  // -1 for the zero polynomial
  bool is_zero() const { return terms_.empty(); }
  const TermMap& terms() const { return terms_; }
  double coeff(const Exponent& e) const;
  double max_abs_coeff() const;

  double eval(std::span<const double> x) const;
  double operator()(std::span<const double> x) const { return eval(x); }
  double eval(const Vec3& x) const { return eval(std::span<const double>(x.data(), nvars_)); }
  double eval1(double t) const;
  // Σ |c_α| |x^α|
  double eval_abs(const Vec3& x) const;

  Polynomial derivative(int i) const;
  // p(A y + b) where A is num_vars x m (row-major) and y has m variables.
  Polynomial compose_affine(const std::vector<double>& A, const std::vector<double>& b, int m) const;
  // Coefficients of t -> p(base + t dir), lowest degree first.
  std::vector<double> restrict_to_line(const Vec3& base, const Vec3& dir) const;

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double s);

  nlohmann::json to_json() const;
  static Polynomial from_json(const nlohmann::json& j);

 private:
  void finalize();
  double horner_dense(const double* D, std::span<const double> x) const;

  int nvars_;
  int degree_ = -1;
  TermMap terms_;
  std::vector<double> dense_;  // (degree_+1)^nvars_ block for Horner evaluation
  std::vector<double> abs_;    // same layout, absolute values
};

Polynomial operator+(Polynomial a, const Polynomial& b);
Polynomial operator-(Polynomial a, const Polynomial& b);
Polynomial operator*(const Polynomial& a, const Polynomial& b);
Polynomial operator*(double s, Polynomial a);
Polynomial pow(const Polynomial& p, int k);

std::vector<Polynomial> gradient(const Polynomial& p);
Vec3 eval_gradient(const std::vector<Polynomial>& grad, const Vec3& x);

// |grad p| floor below which a point counts as singular.
double singular_floor(const Polynomial& p);
// Degree-aware zero tolerance 1e-9 * Σ|c_α||x^α| + 1e-14 * max|c_α|.
double zero_tolerance(const Polynomial& p, const Vec3& x);

// arcsin(|grad p . v| / |grad p|), the angle between v and the tangent plane at z.
double angle_to_zero_set(const Polynomial& p, const Vec3& z, const Direction& v);

// (grad Q . v)^2 - sin^2(a) |grad Q|^2
Polynomial critical_angle_polynomial(const Polynomial& Q, const Direction& v, double a);
// grad Q . w
Polynomial tangency_polynomial(const Polynomial& Q, const Direction& w);
// ((grad Q1 x grad Q2) . v)^2 - cos^2(a) |grad Q1 x grad Q2|^2
Polynomial curve_critical_angle_polynomial(const Polynomial& Q1, const Polynomial& Q2, const Direction& v,
                                           double a);

struct Box {
  Vec3 lo{-1, -1, -1};
  Vec3 hi{1, 1, 1};
};

struct PerturbOptions {
  Box region;
  double floor = 0.0;     // 0 selects singular_floor of the result
  double spacing = 0.05;  // zero-set sampling spacing used for verification
  int max_retries = 16;
};

// p - h for a random constant h with |h| in [magnitude/2, magnitude], verified
// non-singular on a zero-set sample. Throws perturbation_failed.
Polynomial perturb_nonsingular(const Polynomial& p, std::uint64_t seed, double magnitude,
                               const PerturbOptions& opt = {});

}  // namespace polylab
