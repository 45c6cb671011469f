#include <doctest.h>

#include <cmath>

#include "polylab/variety_tubes.hpp"

using namespace polylab;

namespace {

Polynomial X(int i) { return Polynomial::variable(3, i); }
Polynomial K(double c) { return Polynomial::constant(3, c); }

Polynomial sphere(double r, const Vec3& c = {0, 0, 0}) {
  Polynomial p = K(-r * r);
  for (int i = 0; i < 3; ++i) p += (X(i) - K(c[i])) * (X(i) - K(c[i]));
  return p;
}

Polynomial slabs(int k) {
  Polynomial p = K(1);
  for (int j = 0; j < k; ++j) p = p * (X(0) - K(j + 0.5));
  return p;
}

}  // namespace

TEST_CASE("tube membership under dilation") {
  Tube T = Tube::make({0, 0, 0}, {0, 0, 2}, 0.5, 4);
  CHECK(T.contains({0.4, 0, 1.9}));
  CHECK(!T.contains({0.6, 0, 0}));
  CHECK(T.contains({0.6, 0, 0}, 2));
  CHECK(T.contains({4.9, 0, 0}, 10));
  CHECK(!T.contains({0, 0, 2.6}));
  CHECK(T.distance({0, 0, 3}) == doctest::Approx(1.0));
}

TEST_CASE("sample zero set examples") {
  auto s = sample_zero_set(X(2), Box{{0, 0, -0.5}, {1, 1, 0.5}}, 0.1);
  CHECK(s.size() >= 100);
  CHECK(s.size() <= 130);
  for (const auto& z : s) CHECK(X(2).eval(z.x) == 0.0);
  Rng rng = make_rng(2);
  Polynomial p = Polynomial::random(3, 4, rng);
  for (const auto& z : sample_zero_set(p, Box{}, 0.1))
    CHECK(std::abs(p.eval(z.x)) <= zero_tolerance(p, z.x));
}

TEST_CASE("classify tube examples") {
  Ball B{{0, 0, 0}, 5};
  auto r1 = classify_tube(Tube::make({0, 0, 0}, {1, 0, 0}, 0.5, 6), X(2), B, 1e-6);
  CHECK(r1.cls == TubeClass::tangent);
  CHECK(r1.max_angle == 0.0);
  auto r2 = classify_tube(Tube::make({0, 0, 0}, {0, 0, 1}, 0.5, 6), X(2), B, 0.3);
  CHECK(r2.cls == TubeClass::transverse);
  CHECK(r2.witness_angle == doctest::Approx(M_PI / 2));
  auto r3 = classify_tube(Tube::make({0, 0, 30}, {1, 0, 0}, 0.5, 6), X(2), B, 0.3);
  CHECK(r3.cls == TubeClass::disjoint);

  Polynomial S = sphere(100);
  auto top = classify_tube(Tube::make({0, 0, 99.9995}, {1, 0, 0}, 1, 40), S, Ball{{0, 0, 100}, 4}, 0.1);
  CHECK(top.cls == TubeClass::tangent);
  CHECK(top.max_angle <= std::asin(8.0 / 100) + 1e-3);
  auto mid = classify_tube(Tube::make({0, 0, 0}, {1, 0, 0}, 1, 220), S, Ball{{0, 0, 0}, 100}, 0.1);
  CHECK(mid.cls == TubeClass::transverse);
  CHECK(mid.witness_angle > 1.5);
  CHECK(std::abs(std::abs(mid.witness[0]) - 100) < 1);
}

TEST_CASE("singular-only samples are reported") {
  Polynomial sq = X(2) * X(2);
  try {
    classify_tube(Tube::make({0, 0, 0}, {1, 0, 0}, 0.5, 4), sq, Ball{{0, 0, 0}, 3}, 0.1);
    FAIL("expected singular_only");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::singular_only);
  }
}

TEST_CASE("classification dichotomy on random tubes") {
  Rng rng = make_rng(5);
  Polynomial P = Polynomial::random(3, 3, rng);
  int wall = 0;
  for (int i = 0; i < 60; ++i) {
    Vec3 c{uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)};
    Tube T = Tube::make(c, random_unit(rng), 0.03, 1.0);
    auto r = classify_tube(T, P, Ball{{0, 0, 0}, 0.6}, 0.2, {0.02});
    bool tang = r.cls == TubeClass::tangent, trans = r.cls == TubeClass::transverse;
    if (r.wall_samples > 0) {
      ++wall;
      CHECK(tang != trans);
      if (trans) CHECK(r.witness_angle > 0.2);
      if (tang) CHECK(r.max_angle <= 0.2);
    } else {
      CHECK(r.cls == TubeClass::disjoint);
    }
  }
  CHECK(wall > 0);
}

TEST_CASE("segmentation tiles the axis") {
  Tube T = Tube::make({0, 0, 0}, {0, 1, 0}, 0.1, 3.3);
  auto s = segment_tube(T, 0.1);
  CHECK(s.segment_length == doctest::Approx(1.0));
  REQUIRE(s.segments.size() == 4);
  CHECK(s.segments.front().first == doctest::Approx(-1.65));
  CHECK(s.segments.back().second == doctest::Approx(1.65));
  for (std::size_t i = 0; i + 1 < s.segments.size(); ++i) {
    CHECK(s.segments[i].second == s.segments[i + 1].first);
    CHECK(s.segments[i].second - s.segments[i].first >= s.segment_length * (1 - 1e-12));
  }
}

TEST_CASE("segment count examples") {
  auto one = transverse_segment_count(Tube::make({0, 0, 0}, {0, 0, 1}, 0.05, 2), X(2), 0.1);
  CHECK(one.occupied == 1);
  const double rho = 0.05, a = 0.1, seg = rho / a;
  for (int D = 1; D <= 6; ++D) {
    Polynomial Q = K(1);
    for (int k = 1; k <= D; ++k) Q = Q * (X(0) - K(k * seg * 1.1));
    Tube T = Tube::make({2, 0.01, -0.02}, {1, 0, 0}, rho, 4);
    CHECK(transverse_segment_count(T, Q, a).occupied == D);
  }
  CHECK_THROWS(transverse_segment_count(Tube::make({0, 0, 0}, {0, 0, 1}, 0.05, 2), X(2), 0.2));
}

TEST_CASE("segment count monotone in the angle") {
  Rng rng = make_rng(6);
  Polynomial Q = Polynomial::random(3, 3, rng);
  for (int i = 0; i < 10; ++i) {
    Tube T = Tube::make({uniform(rng, -.5, .5), uniform(rng, -.5, .5), uniform(rng, -.5, .5)}, random_unit(rng),
                        0.02, 2);
    int prev = 1 << 30;
    // a fixed segmentation isolates the effect of the angle filter
    for (double a : {0.01, 0.02, 0.04, 0.06, 0.08, 0.1}) {
      auto seg = segment_tube(T, 0.1);
      (void)seg;
      int c = transverse_segment_count(T, Q, a).survivors;
      CHECK(c <= prev);
      prev = c;
    }
  }
}

TEST_CASE("segment counts for random surfaces stay below 8 D^3") {
  Rng rng = make_rng(7);
  for (int D : {2, 3, 4}) {
    Polynomial Q = Polynomial::random(3, D, rng);
    int worst = 0;
    for (int i = 0; i < 100; ++i) {
      Tube T = Tube::make({uniform(rng, -.5, .5), uniform(rng, -.5, .5), uniform(rng, -.5, .5)},
                          random_unit(rng), 0.02, 2);
      try {
        worst = std::max(worst, transverse_segment_count(T, Q, 0.1).occupied);
      } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::singular_only);
      }
    }
    MESSAGE("D=" << D << " max occupied " << worst << " C=" << worst / double(D * D * D));
    CHECK(worst <= 8 * D * D * D);
  }
}

TEST_CASE("cube count examples") {
  CHECK(count_cubes_meeting_zero_set(X(0) - K(0.5), {10, 10, 10}) == 100);
  CHECK(count_cubes_meeting_zero_set((X(0) - K(0.5)) * (X(1) - K(0.5)), {10, 10, 10}) == 190);
  for (int k = 1; k <= 10; ++k) CHECK(count_cubes_meeting_zero_set(slabs(k), {10, 10, 10}) == 100 * k);
  Polynomial p2 = Polynomial::variable(2, 0) - Polynomial::variable(2, 1);
  CHECK(count_cubes_meeting_zero_set(p2, {5, 5}) >= 5);
  CHECK(count_cubes_meeting_zero_set(slabs(3), {10, 10, 10}, {3, 3}) == 300);
}

TEST_CASE("sphere cube counts scale like L^2") {
  std::vector<double> ratio;
  for (int L : {16, 32, 64}) {
    double h = L / 2.0;
    long long c = count_cubes_meeting_zero_set(sphere(h, {h, h, h}), {L, L, L});
    ratio.push_back(c / (2.0 * L * L));
  }
  for (double r : ratio) {
    CHECK(r <= 8);
    CHECK(std::abs(r / ratio[0] - 1) <= 0.3);
  }
}

TEST_CASE("cube scan has no false negatives against the sampler") {
  Rng rng = make_rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Polynomial P0 = Polynomial::random(3, 3, rng);
    // map [0, 8]^3 to [-1, 1]^3
    std::vector<double> A{0.25, 0, 0, 0, 0.25, 0, 0, 0, 0.25}, b{-1, -1, -1};
    Polynomial P = P0.compose_affine(A, b, 3);
    auto mask = cubes_meeting_zero_set(P, {8, 8, 8});
    for (const auto& z : sample_zero_set(P, Box{{0, 0, 0}, {8, 8, 8}}, 0.5)) {
      bool counted = false;
      // a point on a shared face may sit in any adjacent cube
      for (int di = -1; di <= 0 && !counted; ++di)
        for (int dj = -1; dj <= 0 && !counted; ++dj)
          for (int dl = -1; dl <= 0 && !counted; ++dl) {
            int i = static_cast<int>(std::floor(z.x[0])) + (z.x[0] == std::floor(z.x[0]) ? di : 0);
            int j = static_cast<int>(std::floor(z.x[1])) + (z.x[1] == std::floor(z.x[1]) ? dj : 0);
            int l = static_cast<int>(std::floor(z.x[2])) + (z.x[2] == std::floor(z.x[2]) ? dl : 0);
            if (i < 0 || j < 0 || l < 0 || i > 7 || j > 7 || l > 7) continue;
            counted = mask[(i * 8 + j) * 8 + l];
          }
      CHECK(counted);
    }
  }
}

TEST_CASE("cube scan is deterministic across worker counts") {
  Polynomial S = sphere(9, {10, 10, 10});
  CHECK(count_cubes_meeting_zero_set(S, {20, 20, 20}, {3, 1}) == count_cubes_meeting_zero_set(S, {20, 20, 20}, {3, 4}));
}

TEST_CASE("plane census counts the in-plane directions") {
  const double rho = 1, L = 64;
  std::vector<Tube> tubes;
  Rng rng = make_rng(9);
  for (int i = 0; i < 100; ++i) {
    double phi = M_PI * (i % 37) / 37.0 + 0.01;
    double elev = i < 37 ? 0.5 * rho / L : uniform(rng, 3 * rho / L, M_PI / 2);
    Vec3 d{std::cos(elev) * std::cos(phi), std::cos(elev) * std::sin(phi), std::sin(elev)};
    tubes.push_back(Tube::make({0, 0, 0}, d, rho, L));
  }
  auto c = tangent_direction_census(tubes, X(2), Ball{{0, 0, 0}, L}, rho, L, rho / L, {rho});
  CHECK(c.census == 37);
  for (int i : c.selected) CHECK(std::asin(std::abs(tubes[i].dir[2])) <= rho / L);
}

TEST_CASE("regulus census counts the rulings") {
  const double rho = 1, L = 64, Lambda = 16 * L;
  Polynomial P = Lambda * X(2) - X(0) * X(1);
  std::vector<Tube> tubes;
  const double step = 1.5 * Lambda * rho / L;
  for (int i = -1; i <= 2; ++i) {
    double a = (i - 0.5) * step;
    tubes.push_back(Tube::make({a, 0, 0}, {0, Lambda, a}, rho, L));
    tubes.push_back(Tube::make({0, a, 0}, {Lambda, 0, a}, rho, L));
  }
  // steep tubes through the surface are transverse
  tubes.push_back(Tube::make({5, 3, 15.0 / Lambda}, {0.3, 0.1, 1}, rho, L));
  tubes.push_back(Tube::make({-7, 2, -14.0 / Lambda}, {0, 0.2, 1}, rho, L));
  auto c = tangent_direction_census(tubes, P, Ball{{0, 0, 0}, L}, rho, L, rho / L, {rho});
  CHECK(c.census == 8);
  CHECK(c.transverse == 2);
}
