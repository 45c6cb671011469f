#include <doctest.h>

#include <chrono>
#include <cmath>

#include "polylab/partition.hpp"

using namespace polylab;

namespace {

WeightedPointSet uniform_points(int dim, int n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  WeightedPointSet s;
  s.dim = dim;
  for (int i = 0; i < n; ++i) {
    Vec3 x{0, 0, 0};
    for (int k = 0; k < dim; ++k) x[k] = uniform(rng, -1, 1);
    s.add(x);
  }
  return s;
}

// Signed imbalance recomputed without the library's helpers.
double recount_imbalance(const Polynomial& P, const WeightedPointSet& s) {
  double pos = 0, neg = 0, tot = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    tot += s.w[i];
    double v = P.eval(s.x[i]);
    double absum = 0;
    for (const auto& [e, c] : P.terms()) {
      double m = std::abs(c);
      for (int k = 0; k < P.num_vars(); ++k) m *= std::pow(std::abs(s.x[i][k]), e[k]);
      absum += m;
    }
    double tol = 1e-9 * absum + 1e-14 * P.max_abs_coeff();
    if (std::abs(v) < tol) continue;
    (v > 0 ? pos : neg) += s.w[i];
  }
  return tot > 0 ? std::abs(pos - neg) / tot : 0.0;
}

}  // namespace

TEST_CASE("degree schedule") {
  CHECK(poly_space_dim(2, 3) == 10);
  CHECK(poly_space_dim(3, 2) == 10);
  CHECK(poly_space_dim(1, 4) == 5);
  CHECK(degree_schedule(2, 8) == std::vector<int>{1, 1, 2, 3});
  CHECK(degree_schedule(3, 4) == std::vector<int>{1, 1, 2});
  CHECK(degree_schedule(3, 8) == std::vector<int>{1, 1, 2, 2});
  CHECK(degree_schedule(1, 1) == std::vector<int>{1});
  CHECK(monomials_up_to(3, 2).size() == 10);
}

TEST_CASE("ham sandwich of a symmetric pair") {
  WeightedPointSet s;
  s.dim = 2;
  s.add({-1, 0, 0});
  s.add({1, 0, 0});
  auto r = ham_sandwich({s}, 1, {});
  CHECK(r.max_imbalance == 0.0);
  CHECK(!r.P.is_zero());
  CHECK(r.P.degree() <= 1);
}

TEST_CASE("ham sandwich rejects a budget that is too small") {
  std::vector<WeightedPointSet> sets(3, uniform_points(2, 10, 1));
  CHECK_THROWS_AS(ham_sandwich(sets, 1, {}), Error);
}

TEST_CASE("two planar sets, cross-checked against the line oracle") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<WeightedPointSet> sets{uniform_points(2, 50, seed), uniform_points(2, 50, seed + 100)};
    for (auto& x : sets[1].x) x[0] += 0.5;
    HamSandwichOptions opt;
    opt.tol = 0.02;
    opt.seed = seed;
    auto r = ham_sandwich(sets, 1, opt);
    auto oracle = exact_line_bisection(sets);
    CHECK(oracle.max_imbalance <= 0.02);
    CHECK(r.max_imbalance <= 0.02);
    for (std::size_t j = 0; j < sets.size(); ++j) CHECK(recount_imbalance(r.P, sets[j]) <= opt.tol);
  }
}

TEST_CASE("five planar sets with a conic") {
  std::vector<WeightedPointSet> sets;
  for (int j = 0; j < 5; ++j) sets.push_back(uniform_points(2, 200, 40 + j));
  HamSandwichOptions opt;
  opt.tol = 0.05;
  auto r = ham_sandwich(sets, 2, opt);
  CHECK(r.P.degree() <= 2);
  for (const auto& s : sets) CHECK(recount_imbalance(r.P, s) <= 0.05);
}

TEST_CASE("bisection certificate over random inputs") {
  Rng rng = make_rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    int dim = 2 + trial % 2;
    int D = 1 + trial % 3;
    int N = std::min(poly_space_dim(dim, D) - 1, 1 + trial % 6);
    std::vector<WeightedPointSet> sets;
    for (int j = 0; j < N; ++j) {
      auto s = uniform_points(dim, 30 + 10 * j, 1000 + trial * 10 + j);
      for (auto& w : s.w) w = uniform(rng, 0.1, 2.0);
      sets.push_back(s);
    }
    HamSandwichOptions opt;
    opt.tol = 0.1;
    opt.seed = trial;
    auto r = ham_sandwich_search(sets, D, opt);
    if (r.max_imbalance <= opt.tol)
      for (std::size_t j = 0; j < sets.size(); ++j) CHECK(recount_imbalance(r.P, sets[j]) <= opt.tol);
    CHECK(r.max_imbalance <= opt.tol);
  }
}

TEST_CASE("median split on a line") {
  WeightedPointSet X;
  X.dim = 1;
  Rng rng = make_rng(3);
  for (int i = 0; i < 1024; ++i) X.add({uniform(rng, -5, 5), 0, 0});
  auto part = partition_points(X, 1, {});
  CHECK(part.s() == 1);
  for (const auto& [k, idx] : part.cells) CHECK(idx.size() <= 512);
  CHECK(certify_partition(part, X).holds);
}

TEST_CASE("4096 planar points, D = 8") {
  auto X = uniform_points(2, 4096, 8);
  PartitionOptions opt;
  auto part = partition_points(X, 8, opt);
  CHECK(part.complete);
  CHECK(part.s() == 4);
  CHECK(part.degree() <= 8);
  auto cert = certify_partition(part, X);
  CHECK(cert.recount_matches);
  CHECK(cert.holds);
  double C = cert.max_cell_weight * 64.0 / 4096.0;
  MESSAGE("measured C = " << C << ", wall " << part.wall.size());
  CHECK(C <= 4.0);
}

TEST_CASE("10^4 points in R^3, D = 4") {
  auto X = uniform_points(3, 10000, 9);
  auto part = partition_points(X, 4, {});
  CHECK(part.s() == 3);
  auto cert = certify_partition(part, X);
  CHECK(cert.nonempty_cells <= 8);
  CHECK(cert.max_cell_weight <= std::pow(1.05, 3) / 8 * 10000);
  CHECK(cert.holds);
}

TEST_CASE("partition conservation and mass bound over sizes") {
  for (int n : {50, 300, 1000})
    for (int D : {1, 2, 4, 6}) {
      auto X = uniform_points(2, n, n + D);
      auto part = partition_points(X, D, {});
      std::size_t total = part.wall.size();
      for (const auto& [k, idx] : part.cells) total += idx.size();
      CHECK(total == X.size());
      CHECK(part.degree() <= D);
      CHECK(static_cast<long long>(part.cells.size()) <= (1LL << part.s()));
      CHECK(certify_partition(part, X).holds);
    }
}

TEST_CASE("cell_of round trip and wall membership") {
  auto X = uniform_points(2, 500, 21);
  auto part = partition_points(X, 4, {});
  for (const auto& [key, idx] : part.cells)
    for (int i : idx) CHECK(cell_of(part, X.x[i]) == key);
  // a point on Z(P_1)
  auto c = part.factors[0].restrict_to_line({0, 0, 0}, {1, 0, 0});
  REQUIRE(c.size() == 2);
  Vec3 z{-c[0] / c[1], 0, 0};
  CHECK(cell_of(part, z) == kWall);
  auto fresh = uniform_points(2, 1000, 22);
  std::map<std::string, int> hist;
  for (const auto& x : fresh.x) hist[cell_of(part, x)]++;
  int total = 0;
  for (const auto& [k, v] : hist) total += v;
  CHECK(total == 1000);
}

TEST_CASE("partition serialization is deterministic") {
  auto X = uniform_points(2, 400, 5);
  PartitionOptions opt;
  opt.seed = 42;
  auto a = partition_points(X, 5, opt).to_json(&X).dump();
  auto b = partition_points(X, 5, opt).to_json(&X).dump();
  CHECK(a == b);
}

TEST_CASE("line crossing examples") {
  std::vector<Polynomial> f{Polynomial::variable(2, 0)};
  auto r = line_cell_crossings(f, {-1, 0.3, 0}, {1, 0, 0}, 0, 2);
  CHECK(!r.contained);
  CHECK(r.cells == std::vector<std::string>{"-", "+"});
  auto c = line_cell_crossings(f, {0, 0, 0}, {0, 1, 0}, -1, 1);
  CHECK(c.contained);
  Polynomial x3 = Polynomial::variable(3, 0);
  CHECK(line_cell_crossings({x3}, {0, 5, 1}, {0, 0.6, 0.8}, -10, 10).contained);
}

TEST_CASE("crossing bound for random degree-6 products") {
  Rng rng = make_rng(31);
  std::vector<Polynomial> f{Polynomial::random(2, 1, rng), Polynomial::random(2, 2, rng),
                            Polynomial::random(2, 3, rng)};
  for (int i = 0; i < 500; ++i) {
    Vec3 b{uniform(rng, -1, 1), uniform(rng, -1, 1), 0};
    Vec3 d = random_unit(rng);
    d[2] = 0;
    d = normalized(d);
    auto r = line_cell_crossings(f, b, d, -3, 3);
    CHECK(r.cells.size() <= 7);
  }
}

TEST_CASE("crossing bound over 10^4 partition-line trials") {
  int violations = 0, trials = 0;
  for (int p = 0; p < 4; ++p) {
    int dim = 2 + p % 2;
    auto X = uniform_points(dim, 600, 300 + p);
    auto part = partition_points(X, 6 + p, {});
    Rng rng = make_rng(400 + p);
    for (int i = 0; i < 2500; ++i, ++trials) {
      Vec3 b{uniform(rng, -1, 1), uniform(rng, -1, 1), dim == 3 ? uniform(rng, -1, 1) : 0.0};
      Vec3 d = random_unit(rng);
      if (dim == 2) {
        d[2] = 0;
        d = normalized(d);
      }
      auto r = line_cell_crossings(part, b, d, -2, 2);
      if (!r.contained && static_cast<int>(r.cells.size()) > part.degree() + 1) ++violations;
    }
  }
  CHECK(trials >= 10000);
  CHECK(violations == 0);
}

TEST_CASE("point set json") {
  auto j = nlohmann::json::parse(R"({"dim": 2, "points": [[[0, 1], 2.5], [[1, 1], 1]]})");
  auto s = WeightedPointSet::from_json(j);
  CHECK(s.size() == 2);
  CHECK(s.total_weight() == 3.5);
  CHECK(WeightedPointSet::from_json(s.to_json()).to_json() == s.to_json());
  CHECK_THROWS_AS(WeightedPointSet::from_json(nlohmann::json::parse(R"({"dim": 2, "points": [[[0], 1]]})")),
                  Error);
}
