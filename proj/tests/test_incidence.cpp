#include <doctest.h>

#include <cmath>

#include "polylab/incidence.hpp"

using namespace polylab;

namespace {

// Independent oracle: exact count of r-rich points by checking every pair
// intersection against every line, deduplicated by distance.
int oracle_count(const std::vector<Line>& lines, int r) {
  std::vector<Vec3> seen;
  int count = 0;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const Vec3 n = cross(lines[i].dir, lines[j].dir);
      if (norm(n) < 1e-7) continue;
      // solve base_i + s d_i = base_j + t d_j in the least squares sense
      Vec3 w = lines[j].base - lines[i].base;
      double s = dot(cross(w, lines[j].dir), n) / dot(n, n);
      Vec3 p = lines[i].at(s);
      if (lines[j].distance_to(p) > 1e-8) continue;
      bool dup = false;
      for (const auto& q : seen)
        if (norm(p - q) < 1e-7) dup = true;
      if (dup) continue;
      seen.push_back(p);
      int m = 0;
      for (const auto& l : lines)
        if (l.distance_to(p) < 1e-7) ++m;
      if (m >= r) ++count;
    }
  return count;
}

std::vector<Line> planar2d(int L, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::vector<Line> out;
  for (int i = 0; i < L; ++i) {
    double th = (i + uniform(rng, 0.25, 0.75)) * M_PI / L;
    out.push_back(Line::through({uniform(rng, -1, 1), uniform(rng, -1, 1), 0}, {std::cos(th), std::sin(th), 0}));
  }
  return out;
}

}  // namespace

TEST_CASE("canonical lines compare equal") {
  Line a = Line::through({1, 2, 3}, {1, -1, 2});
  Line b = Line::through(Vec3{1, 2, 3} + 4.5 * Vec3{1, -1, 2}, {-2, 2, -4});
  CHECK(a.same_as(b));
  CHECK(std::abs(dot(a.base, a.dir)) < 1e-12);
  CHECK(Line::from_json(a.to_json()).same_as(a));
}

TEST_CASE("brute force rich point examples") {
  std::vector<Line> two{Line::through({0, 0, 0}, {1, 0, 0}), Line::through({0, 0, 0}, {0, 1, 0})};
  CHECK(rich_points_bruteforce(two, 2).count() == 1);
  auto pencil = generate_configuration(ConfigKind::pencil, 7, 3);
  auto rp = rich_points_bruteforce(pencil, 2);
  REQUIRE(rp.count() == 1);
  CHECK(rp.points[0].multiplicity() == 7);
  CHECK(rich_points_bruteforce(planar2d(20, 4), 2).count() == 190);
  CHECK(rich_points_bruteforce(generate_configuration(ConfigKind::planar, 20, 4), 2).count() == 190);
}

TEST_CASE("rich points lie on their lines") {
  auto lines = generate_configuration(ConfigKind::grid, 60, 2);
  auto rp = rich_points_bruteforce(lines, 2);
  for (const auto& p : rp.points) {
    int near = 0;
    for (const auto& l : lines)
      if (l.distance_to(p.x) <= 1e-8) ++near;
    CHECK(near == p.multiplicity());
  }
  CHECK(static_cast<int>(rp.count()) == oracle_count(lines, 2));
  CHECK(rich_points_bruteforce(lines, 3).count() == 64);
}

TEST_CASE("generator counts") {
  CHECK(rich_points_bruteforce(generate_configuration(ConfigKind::regulus, 20, 1), 2).count() == 100);
  CHECK(rich_points_bruteforce(generate_configuration(ConfigKind::pencil, 7, 1), 2).count() == 1);
  auto rnd = generate_configuration(ConfigKind::random, 100, 1);
  int c = static_cast<int>(rich_points_bruteforce(rnd, 2).count());
  CHECK(c <= 5);
  CHECK(c == oracle_count(rnd, 2));
  auto grid = generate_configuration(ConfigKind::grid, 75, 5);
  CHECK(grid.size() == 75);
  CHECK(rich_points_bruteforce(grid, 2).count() == 125);
}

TEST_CASE("line in surface") {
  Polynomial reg = Polynomial::variable(3, 2) - Polynomial::variable(3, 0) * Polynomial::variable(3, 1);
  CHECK(line_in_surface(Line::through({0, 0, 0}, {1, 0, 0}), reg));
  Polynomial sphere = Polynomial::variable(3, 0) * Polynomial::variable(3, 0) +
                      Polynomial::variable(3, 1) * Polynomial::variable(3, 1) +
                      Polynomial::variable(3, 2) * Polynomial::variable(3, 2) - Polynomial::constant(3, 1);
  CHECK(!line_in_surface(Line::through({0.1, 0.2, 0.3}, {1, 2, 2}), sphere));
  for (const auto& l : generate_configuration(ConfigKind::regulus, 40, 9)) CHECK(line_in_surface(l, reg));
}

TEST_CASE("partitioned count matches brute force on random lines") {
  auto lines = generate_configuration(ConfigKind::random, 50, 11);
  IncidenceOptions opt;
  opt.degree = 3;
  auto res = count_rich_points_partitioned(lines, opt);
  CHECK(res.count == static_cast<long long>(rich_points_bruteforce(lines, 2).count()));
}

TEST_CASE("planar input lands on the wall") {
  auto lines = planar2d(60, 8);
  IncidenceOptions opt;
  opt.degree = 2;
  auto res = count_rich_points_partitioned(lines, opt);
  REQUIRE(res.tree);
  CHECK(!res.tree->leaf);
  CHECK(res.tree->wall.lines_in_Z == 60);
  CHECK(res.tree->wall.count() == 60 * 59 / 2);
  CHECK(res.count == 60 * 59 / 2);
}

TEST_CASE("grid certificates") {
  for (int L : {48, 108, 192}) {
    auto lines = generate_configuration(ConfigKind::grid, L, 3);
    IncidenceOptions opt;
    opt.degree = 3;
    auto res = count_rich_points_partitioned(lines, opt);
    auto chk = check_certificate(*res.tree);
    CHECK(chk.conservation);
    CHECK(chk.crossing_discipline);
    CHECK(res.count == static_cast<long long>(rich_points_bruteforce(lines, 2).count()));
    CHECK(res.tree->rich_count == res.count);
  }
}

TEST_CASE("oracle equivalence across families") {
  for (auto kind : {ConfigKind::planar, ConfigKind::regulus, ConfigKind::pencil, ConfigKind::grid,
                    ConfigKind::random})
    for (int L : {40, 120, 200})
      for (int D : {2, 3, 4}) {
        auto lines = generate_configuration(kind, L, L + D);
        IncidenceOptions opt;
        opt.degree = D;
        auto res = count_rich_points_partitioned(lines, opt);
        auto chk = check_certificate(*res.tree);
        INFO(config_kind_name(kind) << " L=" << L << " D=" << D);
        CHECK(res.count == static_cast<long long>(rich_points_bruteforce(lines, 2).count()));
        CHECK(chk.conservation);
        CHECK(chk.crossing_discipline);
      }
}

TEST_CASE("scaling probe slope") {
  std::vector<double> lx, ly;
  for (int L : {50, 100, 200, 400}) {
    auto lines = generate_configuration(ConfigKind::grid, L, 77);
    lx.push_back(std::log(L));
    ly.push_back(std::log(static_cast<double>(rich_points_bruteforce(lines, 2).count())));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / lx.size();
    my += ly[i] / ly.size();
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  double slope = num / den;
  MESSAGE("grid slope " << slope);
  CHECK(slope < 1.7);
  CHECK(slope > 1.2);
}
