// Polynomial ham-sandwich bisection and iterated polynomial partitioning of
// finite weighted point sets.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "polylab/polynomial.hpp"

namespace polylab {

struct WeightedPointSet {
  int dim = 2;
  std::vector<Vec3> x;
  std::vector<double> w;

  void add(const Vec3& p, double weight = 1.0) {
    x.push_back(p);
    w.push_back(weight);
  }
  std::size_t size() const { return x.size(); }
  double total_weight() const;

  nlohmann::json to_json() const;
  static WeightedPointSet from_json(const nlohmann::json& j);
};

// dim Poly_D(R^n) = C(D+n, n)
int poly_space_dim(int n, int D);
// Monomial exponents of total degree <= D, graded-lex order.
std::vector<Exponent> monomials_up_to(int n, int D);

struct SideWeights {
  double positive = 0, negative = 0, on_zero = 0;
};
SideWeights side_weights(const Polynomial& P, const WeightedPointSet& set);
// |w(P>0) - w(P<0)| / total_weight; points within the zero tolerance count to neither side.
double relative_imbalance(const Polynomial& P, const WeightedPointSet& set);

struct HamSandwichOptions {
  double tol = 0.05;
  std::uint64_t seed = 1;
  int restarts = 24;
  double target = 0.0;  // stop restarting once the max imbalance is at most this
};

struct HamSandwichResult {
  Polynomial P;
  std::vector<double> imbalance;  // per set, relative
  double max_imbalance = 1.0;
  bool vanishes_on_all = false;  // P interpolates every point (degenerate input)
  int restarts_used = 0;
};

class BisectionNotFound : public Error {
 public:
  BisectionNotFound(const std::string& what, HamSandwichResult best)
      : Error(ErrorCode::bisection_not_found, what), best_(std::move(best)) {}
  const HamSandwichResult& best() const { return best_; }

 private:
  HamSandwichResult best_;
};

// Best-effort search; never throws on an unmet tolerance.
HamSandwichResult ham_sandwich_search(const std::vector<WeightedPointSet>& sets, int D,
                                      const HamSandwichOptions& opt = {});
// Throws BisectionNotFound when the best imbalance exceeds opt.tol.
HamSandwichResult ham_sandwich(const std::vector<WeightedPointSet>& sets, int D, const HamSandwichOptions& opt = {});

struct LineCut {
  Vec3 a, b;  // the line through two input points
  std::vector<double> imbalance;
  double max_imbalance = 1.0;
};
// Exhaustive oracle for planar sets and D = 1: best line through two points.
LineCut exact_line_bisection(const std::vector<WeightedPointSet>& sets);

// deg P_k for k = 1.. under the budget D: smallest D_k with dim Poly_{D_k} - 1 >= 2^{k-1}.
std::vector<int> degree_schedule(int dim, int D);

struct PartitionOptions {
  double tol = 0.05;
  std::uint64_t seed = 1;
  bool perturb = true;
  double perturb_magnitude = 1e-6;  // relative to the median |P_k| over the points
  int restarts = 24;
  double target = 0.0;  // per-step early stop, see HamSandwichOptions
};

struct Partition {
  int dim = 2;
  int degree_budget = 0;
  double tol = 0.05;
  std::vector<Polynomial> factors;
  std::vector<bool> factor_nonsingular;
  Polynomial product;
  std::map<std::string, std::vector<int>> cells;
  std::vector<int> wall;
  std::vector<double> step_imbalance;
  bool complete = true;
  std::string status = "ok";

  int s() const { return static_cast<int>(factors.size()); }
  int degree() const { return product.degree(); }
  nlohmann::json to_json(const WeightedPointSet* X = nullptr) const;
};

Partition partition_points(const WeightedPointSet& X, int D, const PartitionOptions& opt = {});

inline const std::string kWall = "WALL";
// Sign vector key of x, or kWall when some factor is within its zero tolerance.
std::string cell_of(const Partition& part, const Vec3& x);
std::string cell_of(const std::vector<Polynomial>& factors, const Vec3& x);

struct MassCertificate {
  double max_cell_weight = 0;
  double off_wall_weight = 0;
  double bound = 0;  // (1+tol)^s 2^-s off_wall_weight
  int nonempty_cells = 0;
  bool recount_matches = true;
  bool holds = false;
};
// Independent recount of every point's sign vector.
MassCertificate certify_partition(const Partition& part, const WeightedPointSet& X);

struct CrossingResult {
  bool contained = false;  // the line lies in Z(P_k) for some k
  std::vector<std::string> cells;
};
// Cells visited by base + t dir for t in [t0, t1].
CrossingResult line_cell_crossings(const std::vector<Polynomial>& factors, const Vec3& base, const Vec3& dir,
                                   double t0, double t1);
inline CrossingResult line_cell_crossings(const Partition& part, const Vec3& base, const Vec3& dir, double t0,
                                          double t1) {
  return line_cell_crossings(part.factors, base, dir, t0, t1);
}

// P restricted to the line vanishes identically (deg P + 1 evaluations).
bool line_in_zero_set(const Polynomial& P, const Vec3& base, const Vec3& dir, double scale = 1.0);

}  // namespace polylab
