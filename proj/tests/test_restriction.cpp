#include <doctest.h>

#include <cmath>
#include <numbers>

#include "polylab/restriction.hpp"

using namespace polylab;

namespace {

constexpr double kPi = std::numbers::pi;

SurfaceSpec tilted() {
  const Polynomial w1 = Polynomial::variable(2, 0), w2 = Polynomial::variable(2, 1);
  return SurfaceSpec(0.9 * (w1 * w1) + 0.7 * (w2 * w2) + 0.2 * (w1 * w2));
}

FreqField bump_field(double dw, const Vec2& c, double r, const Vec3& shift = {0, 0, 0}) {
  return FreqField::sample(
      [&](double a, double b) {
        return std::polar(bump(std::hypot(a - c[0], b - c[1]) / r), -(shift[0] * a + shift[1] * b));
      },
      dw, c[0] - r, c[0] + r, c[1] - r, c[1] + r);
}

ComplexField constant_field(cplx v) {
  ComplexField F;
  F.grid.n1 = F.grid.n2 = F.grid.n3 = 2;
  F.v.assign(F.grid.size(), v);
  return F;
}

}  // namespace

TEST_CASE("profiles") {
  CHECK(bump(0) == 1.0);
  CHECK(bump(1) == 0.0);
  CHECK(bump(-1.2) == 0.0);
  CHECK(smooth_step(0) == 0.0);
  CHECK(smooth_step(1) == 1.0);
  CHECK(smooth_step(0.5) == doctest::Approx(0.5).epsilon(1e-12));
  double prev = 0;
  for (int k = 1; k <= 100; ++k) {
    const double v = smooth_step(k / 100.0);
    CHECK(v >= prev);
    CHECK(v + smooth_step(1 - k / 100.0) == doctest::Approx(1.0).epsilon(1e-12));
    prev = v;
  }
}

TEST_CASE("surface conditions") {
  const SurfaceCheck c = SurfaceSpec::paraboloid().check();
  CHECK(c.ok);
  CHECK(c.hessian_min == doctest::Approx(2.0));
  CHECK(c.high_deriv_max == 0.0);
  CHECK(tilted().check().ok);
  const Polynomial w1 = Polynomial::variable(2, 0), w2 = Polynomial::variable(2, 1);
  const SurfaceCheck bad = SurfaceSpec(3.0 * (w1 * w1 + w2 * w2)).check();
  CHECK(!bad.ok);
  CHECK(bad.violation.find("Hessian") != std::string::npos);
  CHECK(!SurfaceSpec(w1 * w1 + w2 * w2 + 0.01 * w1 * w1 * w1).check().ok);
  CHECK(SurfaceSpec(0.9 * (w1 * w1 + w2 * w2) + 1e-12 * w1 * w1 * w1).check().ok);
  CHECK(!SurfaceSpec(w1 * w1 + w2 * w2 + 0.1 * w1).check().ok);
}

TEST_CASE("constant density at the origin gives the surface area") {
  const auto S = SurfaceSpec::paraboloid();
  const double dw = 0.002;
  const FreqField f = FreqField::sample([](double a, double b) { return cplx(a * a + b * b < 1 ? 1.0 : 0.0); }, dw,
                                        -1, 1, -1, 1);
  // area of the paraboloid over the unit disk: pi (5^3/2 - 1) / 6
  const double area = kPi * (std::pow(5.0, 1.5) - 1) / 6;
  const cplx e = extension_direct(S, f, {0, 0, 0});
  CHECK(e.imag() == 0.0);
  CHECK(std::abs(e.real() - area) <= 5e-3 * area);
}

TEST_CASE("slice transform agrees with direct quadrature") {
  const auto S = SurfaceSpec::paraboloid();
  const double R = 32;
  const double dw = wave_packet_dw(64);
  const FreqField f = random_test_function(S, R, dw, 7, 6);
  const ComplexField F = extension_field(S, f, R, {-20, -20, -6}, {20, 20, 6}, 1);
  Rng rng = make_rng(11);
  std::vector<cplx> a, b;
  double scale = 0;
  for (int k = 0; k < 20; ++k) {
    const int i = static_cast<int>(rng() % F.grid.n1), j = static_cast<int>(rng() % F.grid.n2),
              l = static_cast<int>(rng() % F.grid.n3);
    a.push_back(F.v[F.grid.index(i, j, l)]);
    b.push_back(extension_direct(S, f, F.grid.point(i, j, l)));
    scale = std::max(scale, std::abs(b.back()));
  }
  REQUIRE(scale > 0);
  for (int k = 0; k < 20; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-6 * scale);
}

TEST_CASE("extension is linear") {
  const auto S = tilted();
  const double dw = wave_packet_dw(64);
  FreqField f = random_test_function(S, 32, dw, 1, 4), g = random_test_function(S, 32, dw, 2, 4);
  FreqField h = FreqField::covering(dw, -1.6, 1.6, -1.6, 1.6);
  h.add(f);
  h.add(g, cplx(0.5, -2));
  const Vec3 lo{-8, -8, -3}, hi{8, 8, 3};
  const ComplexField Ef = extension_field(S, f, 32, lo, hi), Eg = extension_field(S, g, 32, lo, hi),
                     Eh = extension_field(S, h, 32, lo, hi);
  double m = 0, err = 0;
  for (std::size_t q = 0; q < Eh.v.size(); ++q) {
    m = std::max(m, std::abs(Eh.v[q]));
    err = std::max(err, std::abs(Eh.v[q] - Ef.v[q] - cplx(0.5, -2) * Eg.v[q]));
  }
  CHECK(err <= 1e-12 * m);
}

TEST_CASE("a bump radiates along the surface normal") {
  const auto S = SurfaceSpec::paraboloid();
  const Vec2 w0{0.3, -0.2};
  const FreqField f = bump_field(0.004, w0, 0.1);
  const Vec3 v = S.normal(w0[0], w0[1]);
  const double peak = std::abs(extension_direct(S, f, {0, 0, 0}));
  for (double t : {10.0, 20.0, 30.0}) {
    CHECK(std::abs(extension_direct(S, f, t * v)) >= 0.7 * peak);
    const Vec3 side = normalized(cross(v, {0, 0, 1}));
    CHECK(std::abs(extension_direct(S, f, t * v + 100.0 * side)) <= 0.02 * peak);
  }
}

TEST_CASE("resolution contract") {
  const auto S = SurfaceSpec::paraboloid();
  const FreqField f = bump_field(0.05, {0.5, 0}, 0.2);
  CHECK_NOTHROW(check_resolution(S, f, 10));
  try {
    check_resolution(S, f, 200);
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::usage);
    CHECK(std::string(e.what()).find("spacing") != std::string::npos);
  }
  CHECK(required_dw(10, 1) == doctest::Approx(2 * kPi / 40));
}

TEST_CASE("broad part examples and the broad narrow identity") {
  const auto S = SurfaceSpec::paraboloid();
  const double R = 32, dw = wave_packet_dw(64);
  FreqField f = FreqField::covering(dw, -1.6, 1.6, -1.6, 1.6);
  std::vector<int> lab(f.size(), -1);
  const std::vector<Vec2> centers{{-0.5, 0}, {0, 0.4}, {0.4, -0.3}};
  for (int t = 0; t < 3; ++t) {
    const FreqField b = bump_field(dw, centers[t], 0.15, {5.0 * t, -3.0 * t, 0});
    f.add(b);
    for (int i = 0; i < f.n1; ++i)
      for (int j = 0; j < f.n2; ++j)
        if (std::hypot(f.w1(i) - centers[t][0], f.w2(j) - centers[t][1]) < 0.15) lab[i * f.n2 + j] = t;
  }
  const Vec3 lo{-16, -16, -4}, hi{16, 16, 4};
  auto taus = extension_fields(S, f, &lab, 3, R, lo, hi);
  const ComplexField ef = extension_field(S, f, R, lo, hi);
  for (double alpha : {0.1, 0.4, 0.7, 1.0, 2.0}) {
    const BroadResult br = broad_part(ef, taus, alpha);
    CHECK(br.identity_violations == 0);
    for (std::size_t q = 0; q < ef.v.size(); ++q) {
      const double a = std::abs(ef.v[q]);
      CHECK(a <= std::max(br.broad[q], br.narrow[q]));
    }
  }

  // one tau carrying all of f
  const std::vector<ComplexField> one{ef};
  const BroadResult narrow = broad_part(ef, one, 0.5);
  CHECK(narrow.broad_points == 0);
  const BroadResult all = broad_part(ef, one, 1.0);
  CHECK(all.broad_points == all.points);
  for (std::size_t q = 0; q < ef.v.size(); ++q) CHECK(all.broad[q] == std::abs(ef.v[q]));

  ComplexField other = ef;
  other.grid.n1 -= 1;
  CHECK_THROWS_AS(broad_part(ef, {other}, 0.5), Error);
}

TEST_CASE("bilinear field examples") {
  const double K = 4;
  const ComplexField a = constant_field(cplx(0, 2)), b = constant_field(cplx(2, 0));
  CHECK(bilinear_field({a}, {{0, 0}}, K) == std::vector<double>(8, 0.0));
  CHECK(bilinear_field({a, b}, {{0, 0}, {0.1, 0}}, K) == std::vector<double>(8, 0.0));
  for (double v : bilinear_field({a, b}, {{0, 0}, {0.5, 0}}, K)) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("parabolic rescaling of the paraboloid is exact") {
  const auto S = SurfaceSpec::paraboloid();
  for (const auto& [w0, r] : {std::pair<Vec2, double>{{0.3, -0.4}, 0.2}, {{-0.5, 0.1}, 0.45}, {{0, 0}, 1.0}}) {
    const Rescaling rs = parabolic_rescale(S, w0, r);
    CHECK(rs.check.ok);
    for (int q = 0; q < 20; ++q) {
      const double e1 = std::cos(q) * 0.9, e2 = std::sin(1.7 * q) * 0.4;
      CHECK(std::abs(rs.s1.height(e1, e2) - (e1 * e1 + e2 * e2)) <= 1e-12);
    }
  }
  const Rescaling id = parabolic_rescale(S, {0, 0}, 1);
  const Vec3 x{3, -4, 7};
  CHECK(id.map(x) == x);
  CHECK(id.weight(S, {0.3, 0.2}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(parabolic_rescale(S, {0.9, 0}, 0.2), Error);
}

TEST_CASE("parabolic rescaling preserves |Ef|") {
  const auto S = tilted();
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const double r = uniform(rng, 0.1, 0.4);
    const double deta = 0.01, dw = r * deta;
    const double ang = uniform(rng, 0, 2 * kPi), rad = uniform(rng, 0, 1 - r);
    const Vec2 w0{std::round(rad * std::cos(ang) / dw) * dw, std::round(rad * std::sin(ang) / dw) * dw};
    if (std::hypot(w0[0], w0[1]) + r > 1) continue;
    const Rescaling rs = parabolic_rescale(S, w0, r);
    CHECK(rs.check.ok);
    const Vec2 a{uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3)};
    const Vec3 sh{uniform(rng, -20, 20), uniform(rng, -20, 20), uniform(rng, -5, 5)};
    auto fn = [&](double u, double v) -> cplx {
      const double t = std::hypot(u - w0[0] - a[0] * r, v - w0[1] - a[1] * r) / (0.6 * r);
      return std::polar(bump(t), -(sh[0] * u + sh[1] * v + sh[2] * S.height(u, v)));
    };
    const FreqField f = FreqField::sample(fn, dw, w0[0] - r, w0[0] + r, w0[1] - r, w0[1] + r);
    const FreqField g = rescale_function(S, rs, fn, deta);
    const double fn2 = l2_norm(S, f);
    for (int k = 0; k < 10; ++k) {
      const Vec3 x{uniform(rng, -40, 40), uniform(rng, -40, 40), uniform(rng, -40, 40)};
      const double lhs = std::abs(extension_direct(S, f, x));
      const double rhs = std::abs(extension_direct(rs.s1, g, rs.map(x)));
      CHECK(std::abs(lhs - rhs) <= 1e-6 * fn2);
    }
  }
}

TEST_CASE("rescaled general surface keeps the structural conditions") {
  const Rescaling rs = parabolic_rescale(tilted(), {0.2, 0.1}, 0.3);
  CHECK(rs.check.ok);
  CHECK(std::abs(rs.s1.height(0, 0)) <= 1e-15);
  const Vec2 g = rs.s1.grad(0, 0);
  CHECK(std::hypot(g[0], g[1]) <= 1e-14);
}

TEST_CASE("wave packets of a function inside one cap") {
  const auto S = SurfaceSpec::paraboloid();
  const double R = 64;
  WavePacketOptions opt;
  opt.delta = 0.24;
  opt.overlap = 0.25;
  const double s = 1 / std::sqrt(R);
  const Vec2 c{1.5 * s, -1.5 * s};
  const FreqField f = bump_field(wave_packet_dw(R, opt), c, 0.2 * s, {10, -5, 0});
  WavePacketSet wp(S, f, R, opt);
  REQUIRE(wp.caps().size() == 1);
  CHECK(wp.caps()[0].a == 1);
  CHECK(wp.caps()[0].b == -2);
  PropertyOptions po;
  po.points = 40;
  const PropertyReport rep = check_wave_packets(wp, po);
  CHECK(rep.support_ok);
  CHECK(rep.budget_max <= 4);
}

TEST_CASE("wave packet properties on random functions") {
  const auto S = SurfaceSpec::paraboloid();
  const double R = 64;
  WavePacketOptions opt;
  opt.delta = 0.24;
  for (std::uint64_t seed : {1, 2}) {
    const FreqField f = random_test_function(S, R, wave_packet_dw(R, opt), seed);
    WavePacketSet wp(S, f, R, opt);
    PropertyOptions po;
    po.seed = seed;
    po.points = 60;
    const PropertyReport rep = check_wave_packets(wp, po);
    CHECK(rep.support_ok);
    CHECK(rep.reconstruction_error <= 1e-3);
    CHECK(rep.budget_max <= 4);
    CHECK(rep.orthogonality_max <= 1e-4);
    CHECK(wp.tube_radius() == doctest::Approx(std::pow(R, 0.74)));
  }
}

TEST_CASE("mu-fold tube subsets stay within the budget") {
  const auto S = SurfaceSpec::paraboloid();
  const double R = 64;
  WavePacketOptions opt;
  opt.delta = 0.24;
  const double dw = wave_packet_dw(R, opt);
  const FreqField f = random_test_function(S, R, dw, 4, 3);
  WavePacketSet wp(S, f, R, opt);
  int best = 0;
  for (int c = 1; c < static_cast<int>(wp.caps().size()); ++c)
    if (wp.cap_energy(c) > wp.cap_energy(best)) best = c;
  const auto tubes = wp.tubes(best);
  std::vector<FreqField> packets;
  for (const auto& t : tubes) packets.push_back(wp.packet(best, t));
  FreqField ftau = FreqField::covering(dw, -1.6, 1.6, -1.6, 1.6);
  for (const auto& p : packets) ftau.add(p);
  const double ref = std::pow(l2_norm(S, ftau), 2);
  Rng rng = make_rng(9);
  for (int mu : {1, 2, 3}) {
    const int subsets = 5;
    std::vector<FreqField> parts(subsets, FreqField::covering(dw, -1.6, 1.6, -1.6, 1.6));
    for (const auto& p : packets) {
      std::vector<int> pick(subsets);
      for (int k = 0; k < subsets; ++k) pick[k] = k;
      for (int m = 0; m < mu; ++m) {
        const int q = m + static_cast<int>(rng() % static_cast<std::uint64_t>(subsets - m));
        std::swap(pick[m], pick[q]);
        parts[pick[m]].add(p);
      }
    }
    double sum = 0;
    for (const auto& p : parts) sum += std::pow(l2_norm(S, p), 2);
    CHECK(sum <= 4.0 * mu * ref);
  }
}

TEST_CASE("wave packet preconditions") {
  const auto S = SurfaceSpec::paraboloid();
  const FreqField f = bump_field(wave_packet_dw(64), {0, 0}, 0.1);
  WavePacketOptions opt;
  CHECK_THROWS_AS(WavePacketSet(S, f, 32, opt), Error);
  opt.delta = 0.3;
  CHECK_THROWS_AS(WavePacketSet(S, f, 64, opt), Error);
  opt.delta = 0.2;
  opt.memory_budget = 1e4;
  try {
    WavePacketSet wp(S, f, 64, opt);
    FAIL("expected a usage error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::usage);
    CHECK(std::string(e.what()).find("smaller R") != std::string::npos);
  }
}

TEST_CASE("packet decay steepens with R") {
  const auto S = SurfaceSpec::paraboloid();
  WavePacketOptions opt;
  opt.delta = 0.24;
  const double a = packet_decay_ratio(S, 64, opt), b = packet_decay_ratio(S, 128, opt);
  CHECK(b < a);
  CHECK(a < 0.1);
}

TEST_CASE("planar example norms") {
  const auto S = SurfaceSpec::paraboloid();
  for (double R : {64.0, 128.0, 256.0, 512.0})
    for (int B : {1, 2, 4}) {
      PlanarOptions o;
      o.R = R;
      o.B = B;
      o.seed = 3;
      const ExampleField ex = build_planar_example(S, o);
      const double pred = std::sqrt(static_cast<double>(B)) * std::pow(R, 0.75);
      CHECK(ex.l2 / pred >= 0.125);
      CHECK(ex.l2 / pred <= 8);
      CHECK(ex.linf <= 8 * B * R);
      CHECK(ex.packets.size() == static_cast<std::size_t>(B) * ex.meta.at("caps").get<std::size_t>());
      CHECK_NOTHROW(check_resolution(S, ex.f, R));
      const auto& n = ex.meta.at("plane_normal");
      for (const auto& p : ex.packets) {
        const Vec3 nv{n[0].get<double>(), n[1].get<double>(), n[2].get<double>()};
        CHECK(std::abs(dot(nv, p.dir)) <= 1 / std::sqrt(R));
        CHECK(std::abs(dot(nv, p.anchor)) <= 1e-9 * R);
      }
    }
  PlanarOptions o;
  o.B = 9;
  CHECK_THROWS_AS(build_planar_example(S, o), Error);
  o.B = 0;
  CHECK_THROWS_AS(build_planar_example(S, o), Error);
}

TEST_CASE("planar slab points lie in many tubes") {
  const auto S = SurfaceSpec::paraboloid();
  PlanarOptions o;
  o.R = 64;
  o.B = 4;
  const ExampleField ex = build_planar_example(S, o);
  const EvalRegion slab = slab_region(ex, ex.meta.at("slab_half_width").get<double>());
  CHECK(tube_overlap_fraction(ex, slab, o.B / 2.0) >= 0.5);
}

TEST_CASE("a single forced packet concentrates on its tube") {
  const auto S = SurfaceSpec::paraboloid();
  PlanarOptions o;
  o.R = 64;
  o.B = 1;
  o.force_cap = 2;
  const ExampleField ex = build_planar_example(S, o);
  REQUIRE(ex.packets.size() == 1);
  const ExamplePacket& p = ex.packets[0];
  const ComplexField F = extension_field(S, ex.f, 64, {-64, -64, 0}, {64, 64, 0});
  double in = 0, all = 0;
  for (int j = 0; j < F.grid.n2; ++j)
    for (int i = 0; i < F.grid.n1; ++i) {
      const Vec3 x = F.grid.point(i, j, 0);
      if (dot(x, x) > 64 * 64) continue;
      const double e = std::norm(F.v[F.grid.index(i, j, 0)]);
      const Vec3 d = x - p.anchor;
      all += e;
      if (norm(d - dot(d, p.dir) * p.dir) <= 4 * ex.tube_radius) in += e;
    }
  CHECK(in >= 0.9 * all);
}

TEST_CASE("planar broad norms obey the broad narrow identity") {
  const auto S = SurfaceSpec::paraboloid();
  PlanarOptions o;
  o.R = 64;
  o.B = 2;
  const ExampleField ex = build_planar_example(S, o);
  const RegionStats st = region_stats(S, ex, slab_region(ex, 3 * std::sqrt(64.0)), 0.4, {3.25, 3.0}, 2);
  CHECK(st.identity_violations == 0);
  CHECK(st.points > 0);
  CHECK(st.broad_pow[0] <= st.all_pow[0]);
  const RegionStats st1 = region_stats(S, ex, slab_region(ex, 3 * std::sqrt(64.0)), 0.4, {3.25, 3.0}, 1);
  CHECK(st1.broad_pow == st.broad_pow);
  CHECK(st1.l2sq == st.l2sq);
}

TEST_CASE("regulus example coverage and broadness") {
  const auto S = SurfaceSpec::paraboloid();
  RegulusOptions o;
  o.R = 128;
  o.K = 4;
  const ExampleField ex = build_regulus_example(S, o);
  CHECK_NOTHROW(check_resolution(S, ex.f, o.R));
  CHECK(ex.summary().at("max_mismatch_angle").get<double>() <= 1 / std::sqrt(o.R));
  const EvalRegion region = regulus_region(ex, ex.meta.at("half_width").get<double>());
  CHECK(tube_overlap_fraction(ex, region, 0) == 1.0);
  // Two comparable families make a point about 1/2-broad, so the threshold sits above 1/2.
  const double alpha = 0.75;
  const RegionStats both = region_stats(S, ex, region, alpha, {3.0});
  CHECK(both.identity_violations == 0);
  const double fb = static_cast<double>(both.broad_points) / static_cast<double>(both.points);
  CHECK(fb >= 0.3);
  o.families = 1;
  const ExampleField one = build_regulus_example(S, o);
  const RegionStats single = region_stats(S, one, region, alpha, {3.0});
  CHECK(static_cast<double>(single.broad_points) / static_cast<double>(single.points) < fb / 3);
}

TEST_CASE("log-log fit") {
  const LineFit f = fit_loglog({2, 4, 8, 16}, {3 * std::pow(2, 0.7), 3 * std::pow(4, 0.7), 3 * std::pow(8, 0.7),
                                               3 * std::pow(16, 0.7)});
  CHECK(f.slope == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3).epsilon(1e-12));
  CHECK(f.max_residual <= 1e-12);
  CHECK_THROWS_AS(fit_loglog({1}, {1}), Error);
}

TEST_CASE("scaling experiment preconditions") {
  const auto S = SurfaceSpec::paraboloid();
  ScalingOptions o;
  o.R_list = {64, 128, 256};
  CHECK_THROWS_AS(scaling_experiment(S, o), Error);
  o.R_list = {64, 256, 128, 512};
  CHECK_THROWS_AS(scaling_experiment(S, o), Error);
  o.R_list = {16, 24, 32, 48};
  o.example = "cone";
  CHECK_THROWS_AS(scaling_experiment(S, o), Error);
}

TEST_CASE("two packet bilinear check") {
  const auto S = SurfaceSpec::paraboloid();
  const BilinearInstance inst = two_packet_instance(S, 64, 0.5, 1);
  CHECK(inst.angle >= 1.0 / 16);
  const auto cubes = wall_cubes(inst);
  REQUIRE(!cubes.empty());
  const BilinearRow row = bilinear_l4_check(S, inst, cubes, 2);
  CHECK(row.integral > 0);
  CHECK(row.cube_ratio_max > 0);
  CHECK(std::isfinite(row.cube_ratio_max));
  CHECK(row.aggregate_ratio > 0);
  double in_cubes = 0;
  for (const auto& c : row.cubes) in_cubes += c.integral;
  CHECK(in_cubes <= row.integral * (1 + 1e-12));
  const std::vector<Cube> partial(cubes.begin(), cubes.begin() + static_cast<std::ptrdiff_t>(cubes.size() / 2));
  CHECK_THROWS_AS(bilinear_l4_check(S, inst, partial), Error);
}
