#include "polylab/polynomial.hpp"

#include <algorithm>
#include <cmath>

namespace polylab {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok: return "ok";
    case ErrorCode::usage: return "usage";
    case ErrorCode::singular_point: return "singular_point";
    case ErrorCode::perturbation_failed: return "perturbation_failed";
    case ErrorCode::bisection_not_found: return "bisection_not_found";
    case ErrorCode::contained_in_variety: return "contained_in_variety";
    case ErrorCode::singular_only: return "singular_only";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

Direction Direction::checked(const Vec3& v) {
  if (std::abs(norm(v) - 1.0) > 1e-12) usage_error("direction vector is not unit norm");
  return Direction{v};
}

Vec3 random_unit(Rng& rng) {
  for (;;) {
    Vec3 g{gaussian(rng), gaussian(rng), gaussian(rng)};
    double n = norm(g);
    if (n > 1e-6) return (1.0 / n) * g;
  }
}

namespace {

void check_vars(int n) {
  if (n < 1 || n > 3) usage_error("polynomials support 1 to 3 variables");
}

int total(const Exponent& e) { return e[0] + e[1] + e[2]; }

}  // namespace

Polynomial::Polynomial(int num_vars) : nvars_(num_vars) {
  check_vars(num_vars);
  finalize();
}

Polynomial::Polynomial(int num_vars, TermMap terms) : nvars_(num_vars), terms_(std::move(terms)) {
  check_vars(num_vars);
  for (const auto& [e, c] : terms_) {
    for (int i = nvars_; i < 3; ++i)
      if (e[i] != 0) usage_error("exponent uses a variable beyond num_vars");
    for (int i = 0; i < 3; ++i)
      if (e[i] < 0) usage_error("negative exponent");
  }
  finalize();
}

void Polynomial::finalize() {
  for (auto it = terms_.begin(); it != terms_.end();) {
    if (it->second == 0.0 || !std::isfinite(it->second)) {
      if (!std::isfinite(it->second)) throw Error(ErrorCode::internal, "non-finite coefficient");
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  degree_ = -1;
  for (const auto& [e, c] : terms_) degree_ = std::max(degree_, total(e));
  dense_.clear();
  abs_.clear();
  if (degree_ < 0) return;
  const int s = degree_ + 1;
  std::size_t size = 1;
  for (int i = 0; i < nvars_; ++i) size *= s;
  dense_.assign(size, 0.0);
  abs_.assign(size, 0.0);
  for (const auto& [e, c] : terms_) {
    std::size_t idx = 0;
    for (int i = 0; i < nvars_; ++i) idx = idx * s + e[i];
    dense_[idx] = c;
    abs_[idx] = std::abs(c);
  }
}

Polynomial Polynomial::constant(int num_vars, double c) {
  TermMap t;
  t[{0, 0, 0}] = c;
  return Polynomial(num_vars, std::move(t));
}

Polynomial Polynomial::variable(int num_vars, int i) {
  if (i < 0 || i >= num_vars) usage_error("variable index out of range");
  Exponent e{0, 0, 0};
  e[i] = 1;
  return monomial(num_vars, e);
}

Polynomial Polynomial::monomial(int num_vars, const Exponent& e, double c) {
  TermMap t;
  t[e] = c;
  return Polynomial(num_vars, std::move(t));
}

Polynomial Polynomial::random(int num_vars, int degree, Rng& rng) {
  TermMap t;
  for (int a = 0; a <= degree; ++a)
    for (int b = 0; b <= (num_vars > 1 ? degree - a : 0); ++b)
      for (int c = 0; c <= (num_vars > 2 ? degree - a - b : 0); ++c) t[{a, b, c}] = gaussian(rng);
  return Polynomial(num_vars, std::move(t));
}

double Polynomial::coeff(const Exponent& e) const {
  auto it = terms_.find(e);
  return it == terms_.end() ? 0.0 : it->second;
}

double Polynomial::max_abs_coeff() const {
  double m = 0.0;
  for (const auto& [e, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

double Polynomial::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != nvars_) usage_error("point dimension does not match polynomial");
  return horner_dense(dense_.data(), x);
}

double Polynomial::eval_abs(const Vec3& x) const {
  double ax[3] = {std::abs(x[0]), std::abs(x[1]), std::abs(x[2])};
  return horner_dense(abs_.data(), std::span<const double>(ax, nvars_));
}

double Polynomial::horner_dense(const double* D, std::span<const double> x) const {
  if (degree_ < 0) return 0.0;
  const int d = degree_, s = d + 1;
  if (nvars_ == 1) {
    double acc = 0.0;
    for (int a = d; a >= 0; --a) acc = acc * x[0] + D[a];
    return acc;
  }
  if (nvars_ == 2) {
    double acc = 0.0;
    for (int a = d; a >= 0; --a) {
      double inner = 0.0;
      const double* row = D + a * s;
      for (int b = d - a; b >= 0; --b) inner = inner * x[1] + row[b];
      acc = acc * x[0] + inner;
    }
    return acc;
  }
  double acc = 0.0;
  for (int a = d; a >= 0; --a) {
    double mid = 0.0;
    for (int b = d - a; b >= 0; --b) {
      double inner = 0.0;
      const double* row = D + (a * s + b) * s;
      for (int c = d - a - b; c >= 0; --c) inner = inner * x[2] + row[c];
      mid = mid * x[1] + inner;
    }
    acc = acc * x[0] + mid;
  }
  return acc;
}

double Polynomial::eval1(double t) const {
  if (nvars_ != 1) usage_error("eval1 needs a univariate polynomial");
  return eval(std::span<const double>(&t, 1));
}

Polynomial Polynomial::derivative(int i) const {
  if (i < 0 || i >= nvars_) usage_error("derivative index out of range");
  TermMap t;
  for (const auto& [e, c] : terms_) {
    if (e[i] == 0) continue;
    Exponent f = e;
    f[i] -= 1;
    t[f] += c * e[i];
  }
  return Polynomial(nvars_, std::move(t));
}

Polynomial Polynomial::compose_affine(const std::vector<double>& A, const std::vector<double>& b, int m) const {
  check_vars(m);
  if (static_cast<int>(A.size()) != nvars_ * m || static_cast<int>(b.size()) != nvars_)
    usage_error("affine map has wrong shape");
  std::vector<Polynomial> forms;
  for (int i = 0; i < nvars_; ++i) {
    Polynomial L = Polynomial::constant(m, b[i]);
    for (int j = 0; j < m; ++j) L += A[i * m + j] * Polynomial::variable(m, j);
    forms.push_back(std::move(L));
  }
  std::vector<std::vector<Polynomial>> powers(nvars_);
  for (int i = 0; i < nvars_; ++i) {
    powers[i].push_back(Polynomial::constant(m, 1.0));
    for (int k = 1; k <= std::max(degree_, 0); ++k) powers[i].push_back(powers[i].back() * forms[i]);
  }
  Polynomial out(m);
  for (const auto& [e, c] : terms_) {
    Polynomial term = Polynomial::constant(m, c);
    for (int i = 0; i < nvars_; ++i)
      if (e[i] > 0) term = term * powers[i][e[i]];
    out += term;
  }
  return out;
}

std::vector<double> Polynomial::restrict_to_line(const Vec3& base, const Vec3& dir) const {
  const int d = std::max(degree_, 0);
  // pw[i][k] = coefficients of (base_i + t dir_i)^k
  std::vector<std::vector<std::vector<double>>> pw(nvars_);
  for (int i = 0; i < nvars_; ++i) {
    pw[i].push_back({1.0});
    for (int k = 1; k <= d; ++k) {
      const auto& prev = pw[i].back();
      std::vector<double> next(prev.size() + 1, 0.0);
      for (std::size_t j = 0; j < prev.size(); ++j) {
        next[j] += prev[j] * base[i];
        next[j + 1] += prev[j] * dir[i];
      }
      pw[i].push_back(std::move(next));
    }
  }
  std::vector<double> out(d + 1, 0.0);
  std::vector<double> acc, tmp;
  for (const auto& [e, c] : terms_) {
    acc.assign(1, c);
    for (int i = 0; i < nvars_; ++i) {
      if (e[i] == 0) continue;
      const auto& f = pw[i][e[i]];
      tmp.assign(acc.size() + f.size() - 1, 0.0);
      for (std::size_t a = 0; a < acc.size(); ++a)
        for (std::size_t b = 0; b < f.size(); ++b) tmp[a + b] += acc[a] * f[b];
      acc.swap(tmp);
    }
    for (std::size_t k = 0; k < acc.size(); ++k) out[k] += acc[k];
  }
  return out;
}

Polynomial Polynomial::operator-() const {
  Polynomial r = *this;
  r *= -1.0;
  return r;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  if (o.nvars_ != nvars_) usage_error("adding polynomials in different numbers of variables");
  for (const auto& [e, c] : o.terms_) terms_[e] += c;
  finalize();
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) {
  if (o.nvars_ != nvars_) usage_error("subtracting polynomials in different numbers of variables");
  for (const auto& [e, c] : o.terms_) terms_[e] -= c;
  finalize();
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  for (auto& [e, c] : terms_) c *= s;
  finalize();
  return *this;
}

Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
Polynomial operator*(double s, Polynomial a) { return a *= s; }

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.num_vars() != b.num_vars()) usage_error("multiplying polynomials in different numbers of variables");
  TermMap t;
  for (const auto& [ea, ca] : a.terms())
    for (const auto& [eb, cb] : b.terms()) t[{ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]}] += ca * cb;
  return Polynomial(a.num_vars(), std::move(t));
}

Polynomial pow(const Polynomial& p, int k) {
  Polynomial r = Polynomial::constant(p.num_vars(), 1.0);
  for (int i = 0; i < k; ++i) r = r * p;
  return r;
}

nlohmann::json Polynomial::to_json() const {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [e, c] : terms_) {
    nlohmann::json ex = nlohmann::json::array();
    for (int i = 0; i < nvars_; ++i) ex.push_back(e[i]);
    terms.push_back(nlohmann::json::array({ex, c}));
  }
  return {{"num_vars", nvars_}, {"terms", terms}};
}

Polynomial Polynomial::from_json(const nlohmann::json& j) {
  try {
    int n = j.at("num_vars").get<int>();
    check_vars(n);
    TermMap t;
    for (const auto& term : j.at("terms")) {
      const auto& ex = term.at(0);
      if (static_cast<int>(ex.size()) != n) throw Error(ErrorCode::parse, "term exponent length mismatch");
      Exponent e{0, 0, 0};
      for (int i = 0; i < n; ++i) e[i] = ex.at(i).get<int>();
      t[e] += term.at(1).get<double>();
    }
    return Polynomial(n, std::move(t));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::parse, std::string("polynomial json: ") + ex.what());
  }
}

std::vector<Polynomial> gradient(const Polynomial& p) {
  if (p.is_zero()) usage_error("gradient of the zero polynomial");
  std::vector<Polynomial> g;
  for (int i = 0; i < p.num_vars(); ++i) g.push_back(p.derivative(i));
  return g;
}

Vec3 eval_gradient(const std::vector<Polynomial>& grad, const Vec3& x) {
  Vec3 g{0, 0, 0};
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] = grad[i].eval(x);
  return g;
}

double singular_floor(const Polynomial& p) { return 1e-8 * (1.0 + p.max_abs_coeff()); }

double zero_tolerance(const Polynomial& p, const Vec3& x) {
  // Rounding bound of the monomial sum at x, plus a floor at the coefficient scale.
  return 1e-9 * p.eval_abs(x) + 1e-14 * std::max(p.max_abs_coeff(), 1e-300);
}

namespace {

Polynomial dot_gradient(const std::vector<Polynomial>& g, const Vec3& v) {
  Polynomial out(g.front().num_vars());
  for (std::size_t i = 0; i < g.size(); ++i)
    if (v[i] != 0.0) out += v[i] * g[i];
  return out;
}

Polynomial norm2(const std::vector<Polynomial>& g) {
  Polynomial out(g.front().num_vars());
  for (const auto& gi : g) out += gi * gi;
  return out;
}

std::vector<Polynomial> as3(const Polynomial& Q) {
  if (Q.num_vars() != 3) usage_error("curve angle polynomials need three variables");
  return gradient(Q);
}

}  // namespace

double angle_to_zero_set(const Polynomial& p, const Vec3& z, const Direction& v) {
  Vec3 g = eval_gradient(gradient(p), z);
  double gn = norm(g);
  if (gn < singular_floor(p)) throw Error(ErrorCode::singular_point, "gradient vanishes at the query point");
  double s = std::min(1.0, std::abs(dot(g, v.v)) / gn);
  return std::asin(s);
}

Polynomial critical_angle_polynomial(const Polynomial& Q, const Direction& v, double a) {
  if (Q.is_zero()) usage_error("critical angle polynomial of zero");
  if (!(a > 0.0 && a < M_PI / 2)) usage_error("angle must lie in (0, pi/2)");
  auto g = gradient(Q);
  Polynomial gv = dot_gradient(g, v.v);
  double s = std::sin(a);
  return gv * gv - (s * s) * norm2(g);
}

Polynomial tangency_polynomial(const Polynomial& Q, const Direction& w) {
  if (Q.is_zero()) usage_error("tangency polynomial of zero");
  return dot_gradient(gradient(Q), w.v);
}

Polynomial curve_critical_angle_polynomial(const Polynomial& Q1, const Polynomial& Q2, const Direction& v,
                                           double a) {
  if (Q1.is_zero() || Q2.is_zero()) usage_error("curve angle polynomial of zero");
  auto g1 = as3(Q1), g2 = as3(Q2);
  std::vector<Polynomial> c = {g1[1] * g2[2] - g1[2] * g2[1], g1[2] * g2[0] - g1[0] * g2[2],
                               g1[0] * g2[1] - g1[1] * g2[0]};
  Polynomial cv = dot_gradient(c, v.v);
  double ca = std::cos(a);
  return cv * cv - (ca * ca) * norm2(c);
}

}  // namespace polylab
