#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polylab/polynomial.hpp"
#include "polylab/roots.hpp"
#include "polylab/zero_set.hpp"

using namespace polylab;

namespace {

Polynomial X(int n, int i) { return Polynomial::variable(n, i); }
Polynomial C(int n, double c) { return Polynomial::constant(n, c); }
Polynomial sphere() { return X(3, 0) * X(3, 0) + X(3, 1) * X(3, 1) + X(3, 2) * X(3, 2) - C(3, 1); }
Polynomial regulus() { return X(3, 2) - X(3, 0) * X(3, 1); }

double naive_eval(const Polynomial& p, const Vec3& x) {
  double s = 0;
  for (const auto& [e, c] : p.terms()) s += c * std::pow(x[0], e[0]) * std::pow(x[1], e[1]) * std::pow(x[2], e[2]);
  return s;
}

Vec3 rand_point(Rng& rng) { return {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}; }

// Rotation matrix from a random unit quaternion.
std::array<Vec3, 3> random_rotation(Rng& rng) {
  double q[4];
  double n = 0;
  for (double& v : q) {
    v = gaussian(rng);
    n += v * v;
  }
  n = std::sqrt(n);
  for (double& v : q) v /= n;
  double a = q[0], b = q[1], c = q[2], d = q[3];
  return {Vec3{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
          Vec3{2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)},
          Vec3{2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d}};
}

Vec3 rotate(const std::array<Vec3, 3>& R, const Vec3& x) { return {dot(R[0], x), dot(R[1], x), dot(R[2], x)}; }

}  // namespace

TEST_CASE("eval examples") {
  Polynomial p = X(2, 0) * X(2, 0) + X(2, 1) * X(2, 1);
  CHECK(p.eval(Vec3{0, 0, 0}) == 0.0);
  CHECK(regulus().eval(Vec3{2, 3, 6}) == 0.0);
  CHECK_THROWS_AS(p.eval(std::span<const double>()), Error);
}

TEST_CASE("eval matches naive summation") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Polynomial p = Polynomial::random(3, 4, rng);
    Vec3 x = rand_point(rng);
    double ref = naive_eval(p, x);
    double scale = 0;
    for (const auto& [e, c] : p.terms()) scale += std::abs(c);
    CHECK(std::abs(p.eval(x) - ref) <= 1e-12 * scale);
  }
}

TEST_CASE("gradient examples") {
  auto g = gradient(sphere());
  REQUIRE(g.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK((g[i] - 2.0 * X(3, i)).is_zero());
  auto h = gradient(regulus());
  CHECK((h[0] + X(3, 1)).is_zero());
  CHECK((h[1] + X(3, 0)).is_zero());
  CHECK((h[2] - C(3, 1)).is_zero());
  CHECK_THROWS_AS(gradient(Polynomial(3)), Error);
}

TEST_CASE("gradient matches central differences") {
  Rng rng = make_rng(12);
  const double h = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    Polynomial p = Polynomial::random(3, 4, rng);
    auto g = gradient(p);
    for (const auto& gi : g) CHECK(gi.degree() <= p.degree() - 1);
    Vec3 x = rand_point(rng);
    Vec3 v = random_unit(rng);
    double fd = (p.eval(x + h * v) - p.eval(x - h * v)) / (2 * h);
    CHECK(std::abs(fd - dot(eval_gradient(g, x), v)) <= 1e-5 * (1 + p.max_abs_coeff()));
  }
}

TEST_CASE("angle to zero set examples") {
  Polynomial plane = X(3, 2);
  CHECK(angle_to_zero_set(plane, {0.3, -0.2, 0}, Direction::checked({0, 0, 1})) ==
        doctest::Approx(std::numbers::pi / 2));
  CHECK(angle_to_zero_set(plane, {0.3, -0.2, 0}, Direction::checked({1, 0, 0})) == doctest::Approx(0.0));
  double s = 1 / std::sqrt(2.0);
  CHECK(angle_to_zero_set(sphere(), {1, 0, 0}, Direction::checked({s, s, 0})) ==
        doctest::Approx(std::asin(s)).epsilon(1e-14));
  Polynomial cone = X(3, 0) * X(3, 0) + X(3, 1) * X(3, 1) - X(3, 2) * X(3, 2);
  try {
    angle_to_zero_set(cone, {0, 0, 0}, Direction::checked({0, 0, 1}));
    FAIL("expected singular point");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_point);
  }
  CHECK_THROWS(Direction::checked({1, 1, 0}));
}

TEST_CASE("angle invariant under scaling and rigid motion") {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Polynomial Q = Polynomial::random(3, 3, rng);
    auto samples = sample_zero_set(Q, Box{}, 0.25);
    if (samples.empty()) continue;
    const auto& z = samples[trial % samples.size()];
    if (!z.nonsingular) continue;
    Direction v = Direction::from(random_unit(rng));
    double a0 = angle_to_zero_set(Q, z.x, v);
    CHECK(std::abs(angle_to_zero_set(-3.7 * Q, z.x, v) - a0) <= 1e-9);
    // Q'(y) = Q(R^T (y - t)); z' = R z + t; v' = R v
    auto R = random_rotation(rng);
    Vec3 t = rand_point(rng);
    std::vector<double> A(9), b(3);
    for (int i = 0; i < 3; ++i) {
      b[i] = 0;
      for (int j = 0; j < 3; ++j) {
        A[i * 3 + j] = R[j][i];
        b[i] -= R[j][i] * t[j];
      }
    }
    Polynomial Q2 = Q.compose_affine(A, b, 3);
    double a1 = angle_to_zero_set(Q2, rotate(R, z.x) + t, Direction::from(rotate(R, v.v)));
    CHECK(std::abs(a1 - a0) <= 1e-9);
  }
}

TEST_CASE("product evaluation invariant") {
  Rng rng = make_rng(14);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + trial % 3;
    Polynomial p = Polynomial::random(n, 1 + trial % 4, rng);
    Polynomial q = Polynomial::random(n, 1 + (trial / 3) % 4, rng);
    Vec3 x = rand_point(rng);
    double pq = (p * q).eval(x), ref = p.eval(x) * q.eval(x);
    CHECK(std::abs(pq - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    CHECK((p * q).degree() == p.degree() + q.degree());
  }
}

TEST_CASE("critical angle polynomial examples") {
  double a = 0.7;
  Polynomial Q1 = critical_angle_polynomial(X(3, 2), Direction::checked({0, 0, 1}), a);
  CHECK(Q1.degree() == 0);
  CHECK(Q1.coeff({0, 0, 0}) == doctest::Approx(std::cos(a) * std::cos(a)));

  Polynomial S = critical_angle_polynomial(sphere(), Direction::checked({0, 0, 1}), std::numbers::pi / 4);
  Polynomial expect = 4.0 * X(3, 2) * X(3, 2) - 2.0 * (X(3, 0) * X(3, 0) + X(3, 1) * X(3, 1) + X(3, 2) * X(3, 2));
  CHECK((S - expect).max_abs_coeff() < 1e-14);
  double r = 1 / std::sqrt(2.0);
  CHECK(std::abs(S.eval(Vec3{r, 0, r})) < 1e-14);
  CHECK(std::abs(S.eval(Vec3{0, -r, -r})) < 1e-14);
  CHECK(std::abs(S.eval(Vec3{1, 0, 0})) > 1);

  Rng rng = make_rng(15);
  Polynomial Q5 = Polynomial::random(3, 5, rng);
  CHECK(critical_angle_polynomial(Q5, Direction::checked({1, 0, 0}), 0.4).degree() <= 8);
  CHECK_THROWS(critical_angle_polynomial(Q5, Direction::checked({1, 0, 0}), 0.0));
}

TEST_CASE("critical angle zero set matches the angle predicate") {
  Rng rng = make_rng(16);
  Polynomial Q = Polynomial::random(3, 3, rng);
  Direction v = Direction::from(random_unit(rng));
  const double a = 0.5;
  Polynomial Q1 = critical_angle_polynomial(Q, v, a);
  auto samples = sample_zero_set(Q, Box{}, 0.05);
  auto grad = gradient(Q);
  int checked = 0;
  for (const auto& z : samples) {
    if (!z.nonsingular || checked >= 100) continue;
    double ang = angle_to_zero_set(Q, z.x, v);
    double g2 = dot(eval_gradient(grad, z.x), eval_gradient(grad, z.x));
    // Q1 / |∇Q|² = sin²(angle) − sin²(a)
    double rel = Q1.eval(z.x) / g2;
    CHECK(rel == doctest::Approx(std::sin(ang) * std::sin(ang) - std::sin(a) * std::sin(a)).epsilon(1e-9));
    bool on = std::abs(rel) < 1e-9;
    CHECK(on == (std::abs(ang - a) < 1e-6));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("tangency polynomial examples") {
  Polynomial t = tangency_polynomial(sphere(), Direction::checked({0, 0, 1}));
  CHECK((t - 2.0 * X(3, 2)).is_zero());
  Polynomial u = tangency_polynomial(regulus(), Direction::checked({1, 0, 0}));
  CHECK((u + X(3, 1)).is_zero());
  // the ruling x2 = x3 = 0 lies in both zero sets
  for (double s : {-2.0, 0.0, 1.5}) {
    CHECK(regulus().eval(Vec3{s, 0, 0}) == 0.0);
    CHECK(u.eval(Vec3{s, 0, 0}) == 0.0);
  }
}

TEST_CASE("tangency zero set has angle zero") {
  Rng rng = make_rng(17);
  Polynomial Q = Polynomial::random(3, 3, rng);
  Direction w = Direction::from(random_unit(rng));
  Polynomial T = tangency_polynomial(Q, w);
  CHECK(T.degree() <= Q.degree() - 1);
  auto grad = gradient(Q);
  int checked = 0;
  for (const auto& z : sample_zero_set(Q, Box{}, 0.04)) {
    if (!z.nonsingular) continue;
    // walk along Z(Q) to Z(T) by alternating projections
    Vec3 x = z.x;
    auto gT = gradient(T);
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      if (!project_to_zero_set(Q, grad, x)) break;
      double f = T.eval(x);
      if (std::abs(f) < 1e-12) {
        ok = true;
        break;
      }
      Vec3 gt = eval_gradient(gT, x), gq = eval_gradient(grad, x);
      Vec3 tg = gt - (dot(gt, gq) / dot(gq, gq)) * gq;
      if (dot(tg, tg) < 1e-20) break;
      x = x - (f / dot(tg, tg)) * tg;
    }
    if (!ok || norm(eval_gradient(grad, x)) < 1e-3) continue;
    CHECK(angle_to_zero_set(Q, x, w) <= 1e-8);
    if (++checked >= 50) break;
  }
  CHECK(checked > 0);
}

TEST_CASE("curve critical angle examples") {
  double a = 0.6;
  Polynomial q1 = curve_critical_angle_polynomial(X(3, 2), X(3, 1), Direction::checked({1, 0, 0}), a);
  CHECK(q1.degree() == 0);
  CHECK(q1.coeff({0, 0, 0}) == doctest::Approx(std::sin(a) * std::sin(a)));
  Polynomial q2 = curve_critical_angle_polynomial(X(3, 2), X(3, 1), Direction::checked({0, 1, 0}), a);
  CHECK(q2.coeff({0, 0, 0}) == doctest::Approx(-std::cos(a) * std::cos(a)));
  // horizontal circle: the cross product of gradients has no e3 component
  Polynomial plane = X(3, 2) - C(3, 0.5);
  Polynomial qa = curve_critical_angle_polynomial(sphere(), plane, Direction::checked({0, 0, 1}), 1.0);
  for (double t = 0; t < 6.28; t += 0.3) {
    double r = std::sqrt(0.75);
    CHECK(qa.eval(Vec3{r * std::cos(t), r * std::sin(t), 0.5}) < -1e-3);
  }
}

TEST_CASE("degree bounds hold exactly") {
  Rng rng = make_rng(18);
  for (int trial = 0; trial < 40; ++trial) {
    int d1 = 1 + trial % 5, d2 = 1 + (trial / 5) % 4;
    Polynomial Q = Polynomial::random(3, d1, rng), Q2 = Polynomial::random(3, d2, rng);
    Direction v = Direction::from(random_unit(rng));
    CHECK(critical_angle_polynomial(Q, v, 0.3).degree() <= 2 * d1);
    CHECK(tangency_polynomial(Q, v).degree() <= d1 - 1);
    CHECK(curve_critical_angle_polynomial(Q, Q2, v, 0.3).degree() <= 2 * (d1 + d2) - 4);
  }
}

TEST_CASE("perturbation examples") {
  Polynomial cone = X(2, 0) * X(2, 0) + X(2, 1) * X(2, 1);
  PerturbOptions opt;
  opt.spacing = 0.02;
  Polynomial q = perturb_nonsingular(cone, 5, 1e-2, opt);
  double h = -q.coeff({0, 0, 0});
  CHECK(h > 0);
  CHECK(h <= 1e-2);
  auto samples = sample_zero_set(q, Box{}, 0.005);
  CHECK(!samples.empty());
  for (const auto& s : samples) CHECK(norm(s.x) == doctest::Approx(std::sqrt(h)).epsilon(1e-6));

  Polynomial smooth = sphere();
  Polynomial same = perturb_nonsingular(smooth, 1, 0.0);
  CHECK((same - smooth).is_zero());

  Polynomial xy = X(2, 0) * X(2, 0) * X(2, 1) * X(2, 1);
  CHECK_THROWS_AS(perturb_nonsingular(xy, 1, 0.0), Error);
  PerturbOptions dense;
  dense.spacing = 2.0 / 100;  // about 10^4 grid nodes
  Polynomial pq = perturb_nonsingular(xy, 9, 1e-3, dense);
  double floor = singular_floor(pq);
  auto zs = sample_zero_set(pq, Box{}, dense.spacing);
  CHECK(zs.size() > 50);
  for (const auto& s : zs) CHECK(s.grad_norm >= floor);
}

TEST_CASE("json round trip and graded-lex order") {
  Rng rng = make_rng(19);
  Polynomial p = Polynomial::random(3, 3, rng);
  auto j = p.to_json();
  Polynomial q = Polynomial::from_json(j);
  CHECK((p - q).is_zero());
  CHECK(q.to_json().dump() == j.dump());
  int prev_deg = -1;
  for (const auto& t : j["terms"]) {
    int d = t[0][0].get<int>() + t[0][1].get<int>() + t[0][2].get<int>();
    CHECK(d >= prev_deg);
    prev_deg = d;
  }
  CHECK_THROWS_AS(Polynomial::from_json(nlohmann::json::parse(R"({"num_vars": 7, "terms": []})")), Error);
}

TEST_CASE("restriction to a line") {
  Rng rng = make_rng(20);
  Polynomial p = Polynomial::random(3, 4, rng);
  Vec3 b = rand_point(rng), d = random_unit(rng);
  auto c = p.restrict_to_line(b, d);
  CHECK(c.size() <= 5);
  for (double t : {-1.3, 0.0, 0.4, 2.0}) CHECK(horner(c, t) == doctest::Approx(p.eval(b + t * d)).epsilon(1e-12));
}

TEST_CASE("univariate real roots") {
  // (t-1)(t+2)(t-0.5)
  std::vector<double> c{1.0, -2.5, 0.5, 1.0};
  auto r = real_roots(c, -5, 5);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(-2));
  CHECK(r[1] == doctest::Approx(0.5));
  CHECK(r[2] == doctest::Approx(1));
  // double root at 0 is only reported with a touch tolerance
  std::vector<double> sq{0.0, 0.0, 1.0};
  CHECK(real_roots(sq, -1, 1).size() <= 1);
  CHECK(real_roots({1.0, 0.0, 1.0}, -3, 3).empty());
}

TEST_CASE("sampled zero set points satisfy the tolerance") {
  auto s = sample_zero_set(sphere(), Box{}, 0.1);
  CHECK(s.size() > 100);
  for (const auto& z : s) {
    CHECK(std::abs(norm(z.x) - 1) < 1e-8);
    CHECK(z.nonsingular);
  }
  Polynomial line2d = X(2, 0) - X(2, 1);
  auto l = sample_zero_set(line2d, Box{}, 0.1);
  CHECK(l.size() >= 10);
  for (const auto& z : l) CHECK(z.x[2] == 0.0);
}
