#include "polylab/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "polylab/roots.hpp"
#include "polylab/zero_set.hpp"

namespace polylab {

double WeightedPointSet::total_weight() const { return std::accumulate(w.begin(), w.end(), 0.0); }

nlohmann::json WeightedPointSet::to_json() const {
  nlohmann::json pts = nlohmann::json::array();
  for (std::size_t i = 0; i < x.size(); ++i) {
    nlohmann::json c = nlohmann::json::array();
    for (int k = 0; k < dim; ++k) c.push_back(x[i][k]);
    pts.push_back({c, w[i]});
  }
  return {{"dim", dim}, {"points", pts}};
}

WeightedPointSet WeightedPointSet::from_json(const nlohmann::json& j) {
  WeightedPointSet s;
  try {
    s.dim = j.at("dim").get<int>();
    if (s.dim < 1 || s.dim > 3) throw Error(ErrorCode::parse, "dim must be 1, 2 or 3");
    for (const auto& p : j.at("points")) {
      // [[x...], w] or a bare coordinate list with unit weight
      const auto& c = (p.size() == 2 && p[0].is_array()) ? p[0] : p;
      double wt = (p.size() == 2 && p[0].is_array()) ? p[1].get<double>() : 1.0;
      if (static_cast<int>(c.size()) != s.dim) throw Error(ErrorCode::parse, "point has wrong dimension");
      if (!(wt >= 0)) throw Error(ErrorCode::parse, "weights must be nonnegative");
      Vec3 x{0, 0, 0};
      for (int k = 0; k < s.dim; ++k) x[k] = c[k].get<double>();
      s.add(x, wt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("point set: ") + e.what());
  }
  return s;
}

int poly_space_dim(int n, int D) {
  if (D < 0) return 0;
  long long c = 1;
  for (int i = 1; i <= n; ++i) c = c * (D + i) / i;
  return static_cast<int>(c);
}

std::vector<Exponent> monomials_up_to(int n, int D) {
  std::vector<Exponent> out;
  for (int d = 0; d <= D; ++d)
    for (int a = d; a >= 0; --a) {
      if (n == 1) {
        if (a == d) out.push_back({a, 0, 0});
        continue;
      }
      for (int b = d - a; b >= 0; --b) {
        int c = d - a - b;
        if (n == 2 && c != 0) continue;
        out.push_back({a, b, c});
      }
    }
  return out;
}

SideWeights side_weights(const Polynomial& P, const WeightedPointSet& set) {
  SideWeights s;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double v = P.eval(set.x[i]);
    if (std::abs(v) < zero_tolerance(P, set.x[i]))
      s.on_zero += set.w[i];
    else if (v > 0)
      s.positive += set.w[i];
    else
      s.negative += set.w[i];
  }
  return s;
}

double relative_imbalance(const Polynomial& P, const WeightedPointSet& set) {
  double total = set.total_weight();
  if (total <= 0) return 0.0;
  auto s = side_weights(P, set);
  return std::abs(s.positive - s.negative) / total;
}

namespace {

struct Score {
  double max = 1.0, sum = 1e300;
  bool operator<(const Score& o) const { return max != o.max ? max < o.max : sum < o.sum; }
};

// Sets lifted by the Veronese map in normalized coordinates and reduced to an
// orthonormal basis of the attained value space.
struct Lifted {
  int n = 2, D = 1, r = 0;
  Vec3 center{0, 0, 0};
  double scale = 1.0;
  std::vector<Exponent> mono;
  Eigen::MatrixXd U;        // M x r, values of basis functionals at the points
  Eigen::MatrixXd to_coef;  // m x r, monomial coefficients of basis functionals
  Eigen::VectorXd null_coef;
  std::vector<int> set_of;
  std::vector<double> w;
  std::vector<double> set_total;

  Lifted(const std::vector<WeightedPointSet>& sets, int D_) : D(D_) {
    n = sets.front().dim;
    mono = monomials_up_to(n, D);
    const int m = static_cast<int>(mono.size());
    std::vector<Vec3> pts;
    for (std::size_t j = 0; j < sets.size(); ++j) {
      set_total.push_back(sets[j].total_weight());
      for (std::size_t i = 0; i < sets[j].size(); ++i) {
        if (sets[j].w[i] <= 0) continue;
        pts.push_back(sets[j].x[i]);
        w.push_back(sets[j].w[i]);
        set_of.push_back(static_cast<int>(j));
      }
    }
    const int M = static_cast<int>(pts.size());
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& p : pts)
      for (int k = 0; k < n; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    scale = 0;
    for (int k = 0; k < n; ++k) {
      center[k] = 0.5 * (lo[k] + hi[k]);
      scale = std::max(scale, 0.5 * (hi[k] - lo[k]));
    }
    if (!(scale > 0)) scale = 1.0;
    Eigen::MatrixXd V(M, m);
    for (int i = 0; i < M; ++i) {
      double u[3] = {0, 0, 0};
      for (int k = 0; k < n; ++k) u[k] = (pts[i][k] - center[k]) / scale;
      for (int c = 0; c < m; ++c) {
        double v = 1.0;
        for (int k = 0; k < n; ++k)
          for (int e = 0; e < mono[c][k]; ++e) v *= u[k];
        V(i, c) = v;
      }
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    r = 0;
    while (r < sv.size() && sv(r) > 1e-10 * sv(0)) ++r;
    U = svd.matrixU().leftCols(r);
    to_coef = svd.matrixV().leftCols(r) * sv.head(r).cwiseInverse().asDiagonal();
    if (r < m) null_coef = svd.matrixV().col(m - 1);
  }

  Polynomial to_polynomial(const Eigen::VectorXd& coef) const {
    TermMap t;
    for (std::size_t c = 0; c < mono.size(); ++c)
      if (coef(c) != 0.0) t[mono[c]] = coef(c);
    Polynomial Pu(n, t);
    std::vector<double> A(n * n, 0.0), b(n, 0.0);
    for (int k = 0; k < n; ++k) {
      A[k * n + k] = 1.0 / scale;
      b[k] = -center[k] / scale;
    }
    return Pu.compose_affine(A, b, n);
  }

  // Hard imbalance with values y; |y| <= eps counts as on the zero set.
  Score score(const Eigen::VectorXd& y, std::vector<double>* excess = nullptr) const {
    std::vector<double> e(set_total.size(), 0.0);
    double eps = 1e-12 * y.cwiseAbs().maxCoeff();
    for (int i = 0; i < y.size(); ++i) {
      if (y(i) > eps)
        e[set_of[i]] += w[i];
      else if (y(i) < -eps)
        e[set_of[i]] -= w[i];
    }
    Score s{0.0, 0.0};
    for (std::size_t j = 0; j < e.size(); ++j) {
      if (set_total[j] <= 0) continue;
      double rel = std::abs(e[j]) / set_total[j];
      s.max = std::max(s.max, rel);
      s.sum += rel;
    }
    if (excess) *excess = e;
    return s;
  }
};

// Smoothed residual Σ w tanh(y/σ) / W_j per set and its Jacobian in b.
void smoothed(const Lifted& L, const Eigen::VectorXd& b, double sigma, Eigen::VectorXd& res, Eigen::MatrixXd* J) {
  const int N = static_cast<int>(L.set_total.size());
  res.setZero(N);
  if (J) J->setZero(N, L.r);
  Eigen::VectorXd y = L.U * b;
  for (int i = 0; i < y.size(); ++i) {
    int j = L.set_of[i];
    double t = std::tanh(y(i) / sigma);
    res(j) += L.w[i] * t / L.set_total[j];
    if (J) J->row(j) += (L.w[i] * (1 - t * t) / (sigma * L.set_total[j])) * L.U.row(i);
  }
}

Eigen::VectorXd anneal(const Lifted& L, Eigen::VectorXd b) {
  const double rms = 1.0 / std::sqrt(static_cast<double>(L.U.rows()));
  Eigen::VectorXd res, trial_res;
  Eigen::MatrixXd J;
  double mu = 1e-3;
  for (double sigma = rms; sigma > 2e-5 * rms; sigma *= 0.6) {
    for (int it = 0; it < 6; ++it) {
      smoothed(L, b, sigma, res, &J);
      double cost = res.squaredNorm();
      if (cost < 1e-30) break;
      Eigen::MatrixXd Jt = J - (J * b) * b.transpose();
      Eigen::MatrixXd H = Jt.transpose() * Jt;
      Eigen::VectorXd g = Jt.transpose() * res;
      bool accepted = false;
      for (int tries = 0; tries < 6 && !accepted; ++tries) {
        Eigen::MatrixXd Hm = H;
        Hm.diagonal().array() += mu * (1.0 + H.diagonal().maxCoeff());
        Eigen::VectorXd step = -Hm.ldlt().solve(g);
        Eigen::VectorXd nb = (b + step).normalized();
        smoothed(L, nb, sigma, trial_res, nullptr);
        if (trial_res.squaredNorm() < cost) {
          b = nb;
          mu = std::max(mu / 3, 1e-9);
          accepted = true;
        } else {
          mu *= 4;
        }
      }
      if (!accepted) break;
    }
  }
  return b;
}

// Push the smallest-|value| points on each heavy side across the zero set, or
// onto it when only an odd remainder is left, by a minimum-norm correction.
Eigen::VectorXd polish(const Lifted& L, Eigen::VectorXd b) {
  Eigen::VectorXd y = L.U * b;
  std::vector<double> excess;
  Score best = L.score(y, &excess);
  for (int round = 0; round < 6 && best.max > 0; ++round) {
    const double rms = y.norm() / std::sqrt(static_cast<double>(y.size()));
    const double margin = 1e-3 * rms;
    std::vector<int> rows;
    std::vector<double> target;
    for (std::size_t j = 0; j < excess.size(); ++j) {
      double rem = std::abs(excess[j]);
      if (rem <= 1e-12 * L.set_total[j]) continue;
      double side = excess[j] > 0 ? 1.0 : -1.0;
      std::vector<int> cand;
      for (int i = 0; i < y.size(); ++i)
        if (L.set_of[i] == static_cast<int>(j) && side * y(i) > 0) cand.push_back(i);
      std::sort(cand.begin(), cand.end(), [&](int a, int c) { return std::abs(y(a)) < std::abs(y(c)); });
      for (int i : cand) {
        if (rem <= 1e-12 * L.set_total[j] || static_cast<int>(rows.size()) >= L.r - 1) break;
        if (2 * L.w[i] <= rem * (1 + 1e-12)) {
          rows.push_back(i);
          target.push_back(-side * margin);
          rem -= 2 * L.w[i];
        } else if (L.w[i] <= rem * (1 + 1e-12)) {
          rows.push_back(i);
          target.push_back(0.0);
          rem -= L.w[i];
        }
      }
    }
    if (rows.empty()) break;
    Eigen::MatrixXd C(rows.size(), L.r);
    Eigen::VectorXd t(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      C.row(k) = L.U.row(rows[k]);
      t(k) = target[k] - y(rows[k]);
    }
    Eigen::VectorXd db = C.completeOrthogonalDecomposition().solve(t);
    Eigen::VectorXd nb = b + db;
    Eigen::VectorXd ny = L.U * nb;
    std::vector<double> nex;
    Score s = L.score(ny, &nex);
    if (!(s < best)) break;
    best = s;
    b = nb;
    y = ny;
    excess = nex;
  }
  return b;
}

HamSandwichResult finish(const std::vector<WeightedPointSet>& sets, Polynomial P) {
  HamSandwichResult r;
  r.max_imbalance = 0.0;
  for (const auto& s : sets) {
    double v = relative_imbalance(P, s);
    r.imbalance.push_back(v);
    r.max_imbalance = std::max(r.max_imbalance, v);
  }
  r.P = std::move(P);
  return r;
}

Score score_of(const HamSandwichResult& r) {
  Score s{r.max_imbalance, 0.0};
  for (double v : r.imbalance) s.sum += v;
  return s;
}

}  // namespace

HamSandwichResult ham_sandwich_search(const std::vector<WeightedPointSet>& sets, int D,
                                      const HamSandwichOptions& opt) {
  if (sets.empty()) usage_error("ham_sandwich needs at least one set");
  if (D < 1) usage_error("degree budget must be at least 1");
  const int n = sets.front().dim;
  for (const auto& s : sets)
    if (s.dim != n) usage_error("all sets must share a dimension");
  if (poly_space_dim(n, D) - 1 < static_cast<int>(sets.size()))
    usage_error("degree budget too small for the number of sets");
  if (!(opt.tol > 0 && opt.tol < 1)) usage_error("tol must lie in (0, 1)");

  bool any_mass = false;
  for (const auto& s : sets) any_mass = any_mass || s.total_weight() > 0;
  if (!any_mass) {
    // Every set is empty; any nonzero polynomial bisects vacuously.
    auto r = finish(sets, Polynomial::variable(n, 0));
    return r;
  }

  Lifted L(sets, D);
  if (L.null_coef.size() > 0) {
    auto r = finish(sets, L.to_polynomial(L.null_coef));
    bool all_on = true;
    for (const auto& s : sets) {
      auto sw = side_weights(r.P, s);
      all_on = all_on && sw.positive == 0 && sw.negative == 0;
    }
    if (all_on) {
      r.vanishes_on_all = true;
      return r;
    }
  }
  if (L.r == 0) usage_error("degenerate point sets");

  HamSandwichResult best;
  Score best_score;
  Rng rng = make_rng(opt.seed, 0x4a5);
  for (int rs = 0; rs < std::max(1, opt.restarts); ++rs) {
    Eigen::VectorXd b(L.r);
    for (int k = 0; k < L.r; ++k) b(k) = gaussian(rng);
    b.normalize();
    b = polish(L, anneal(L, b));
    auto cand = finish(sets, L.to_polynomial(L.to_coef * b));
    cand.restarts_used = rs + 1;
    Score s = score_of(cand);
    if (rs == 0 || s < best_score) {
      best = std::move(cand);
      best_score = s;
    }
    best.restarts_used = rs + 1;
    if (best.max_imbalance <= opt.target) break;
  }
  return best;
}

HamSandwichResult ham_sandwich(const std::vector<WeightedPointSet>& sets, int D, const HamSandwichOptions& opt) {
  auto r = ham_sandwich_search(sets, D, opt);
  if (r.max_imbalance > opt.tol)
    throw BisectionNotFound("best imbalance " + std::to_string(r.max_imbalance) + " exceeds tol", r);
  return r;
}

LineCut exact_line_bisection(const std::vector<WeightedPointSet>& sets) {
  std::vector<Vec3> all;
  for (const auto& s : sets) {
    if (s.dim != 2) usage_error("exact line oracle is planar");
    all.insert(all.end(), s.x.begin(), s.x.end());
  }
  LineCut best;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t k = i + 1; k < all.size(); ++k) {
      Vec3 a = all[i], d = all[k] - all[i];
      if (norm(d) == 0) continue;
      // (x - a) x d, as a polynomial
      TermMap t{{{1, 0, 0}, d[1]}, {{0, 1, 0}, -d[0]}, {{0, 0, 0}, a[1] * d[0] - a[0] * d[1]}};
      Polynomial P(2, t);
      std::vector<double> imb;
      double mx = 0;
      for (const auto& s : sets) {
        imb.push_back(relative_imbalance(P, s));
        mx = std::max(mx, imb.back());
      }
      if (mx < best.max_imbalance || best.imbalance.empty()) {
        best = {all[i], all[k], imb, mx};
      }
    }
  return best;
}

std::vector<int> degree_schedule(int dim, int D) {
  std::vector<int> out;
  int used = 0;
  for (int k = 1; k < 30; ++k) {
    long long need = 1LL << (k - 1);
    int Dk = 1;
    while (poly_space_dim(dim, Dk) - 1 < need) ++Dk;
    if (used + Dk > D) break;
    used += Dk;
    out.push_back(Dk);
  }
  return out;
}

std::string cell_of(const std::vector<Polynomial>& factors, const Vec3& x) {
  std::string key;
  for (const auto& P : factors) {
    double v = P.eval(x);
    if (std::abs(v) < zero_tolerance(P, x)) return kWall;
    key.push_back(v > 0 ? '+' : '-');
  }
  return key;
}

std::string cell_of(const Partition& part, const Vec3& x) { return cell_of(part.factors, x); }

namespace {

double median_abs_value(const Polynomial& P, const WeightedPointSet& X, const std::vector<int>& idx) {
  std::vector<double> v;
  for (int i : idx) v.push_back(std::abs(P.eval(X.x[i])));
  if (v.empty()) return 1.0;
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2] > 0 ? v[v.size() / 2] : 1.0;
}

}  // namespace

Partition partition_points(const WeightedPointSet& X, int D, const PartitionOptions& opt) {
  if (X.size() == 0) usage_error("partition of an empty point set");
  if (D < 1) usage_error("degree budget must be at least 1");
  Partition part;
  part.dim = X.dim;
  part.degree_budget = D;
  part.tol = opt.tol;
  part.product = Polynomial::constant(X.dim, 1.0);

  Box region;
  for (int k = 0; k < 3; ++k) {
    region.lo[k] = region.hi[k] = 0;
  }
  for (int k = 0; k < X.dim; ++k) {
    double lo = 1e300, hi = -1e300;
    for (const auto& p : X.x) {
      lo = std::min(lo, p[k]);
      hi = std::max(hi, p[k]);
    }
    double pad = 0.05 * (hi - lo) + 1e-9;
    region.lo[k] = lo - pad;
    region.hi[k] = hi + pad;
  }
  double diag = norm(region.hi - region.lo);

  std::map<std::string, std::vector<int>> cells;
  cells[""] = {};
  for (std::size_t i = 0; i < X.size(); ++i) cells[""].push_back(static_cast<int>(i));

  const auto schedule = degree_schedule(X.dim, D);
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    std::vector<WeightedPointSet> sets;
    std::vector<std::string> keys;
    for (const auto& [key, idx] : cells) {
      WeightedPointSet s;
      s.dim = X.dim;
      for (int i : idx) s.add(X.x[i], X.w[i]);
      sets.push_back(std::move(s));
      keys.push_back(key);
    }
    // Empty cells enter as zero-weight sets.
    while (sets.size() < (std::size_t{1} << k)) {
      WeightedPointSet s;
      s.dim = X.dim;
      sets.push_back(s);
    }
    bool any = false;
    for (const auto& s : sets) any = any || s.size() > 0;
    if (!any) break;

    HamSandwichOptions ho;
    ho.tol = opt.tol;
    ho.seed = derive_seed(opt.seed, 0x9a27, k);
    ho.restarts = opt.restarts;
    ho.target = opt.target;
    auto hs = ham_sandwich_search(sets, schedule[k], ho);
    if (hs.max_imbalance > opt.tol) {
      part.complete = false;
      part.status = "bisection_not_found at step " + std::to_string(k + 1) + " (imbalance " +
                    std::to_string(hs.max_imbalance) + ")";
      break;
    }
    Polynomial Pk = hs.P;
    double achieved = hs.max_imbalance;
    bool nonsingular = false;
    std::vector<int> all_idx;
    for (const auto& [key, idx] : cells) all_idx.insert(all_idx.end(), idx.begin(), idx.end());
    PerturbOptions po;
    po.region = region;
    po.spacing = diag / 48;
    if (opt.perturb && !hs.vanishes_on_all) {
      double mag = opt.perturb_magnitude * median_abs_value(Pk, X, all_idx);
      for (int attempt = 0; attempt < 3 && !nonsingular; ++attempt, mag *= 0.1) {
        try {
          Polynomial Q = perturb_nonsingular(Pk, derive_seed(opt.seed, 0x7e27, k * 8 + attempt), mag, po);
          double worst = 0;
          for (const auto& s : sets) worst = std::max(worst, relative_imbalance(Q, s));
          if (worst <= achieved) {
            Pk = Q;
            achieved = worst;
            nonsingular = true;
          }
        } catch (const Error&) {
        }
      }
    }
    if (!nonsingular) {
      try {
        perturb_nonsingular(Pk, 0, 0.0, po);
        nonsingular = true;
      } catch (const Error&) {
      }
    }

    std::map<std::string, std::vector<int>> next;
    for (const auto& [key, idx] : cells)
      for (int i : idx) {
        double v = Pk.eval(X.x[i]);
        if (std::abs(v) < zero_tolerance(Pk, X.x[i]))
          part.wall.push_back(i);
        else
          next[key + (v > 0 ? '+' : '-')].push_back(i);
      }
    cells = std::move(next);
    part.product = part.product * Pk;
    part.factors.push_back(std::move(Pk));
    part.factor_nonsingular.push_back(nonsingular);
    part.step_imbalance.push_back(achieved);
  }
  if (part.factors.empty()) {
    part.cells.clear();
  } else {
    part.cells = std::move(cells);
  }
  if (part.factors.empty()) part.cells[""] = {};
  if (part.factors.empty())
    for (std::size_t i = 0; i < X.size(); ++i) part.cells[""].push_back(static_cast<int>(i));
  std::sort(part.wall.begin(), part.wall.end());
  return part;
}

MassCertificate certify_partition(const Partition& part, const WeightedPointSet& X) {
  MassCertificate c;
  std::map<std::string, double> weight;
  std::vector<std::string> recorded(X.size());
  for (const auto& [key, idx] : part.cells)
    for (int i : idx) recorded[i] = key;
  for (int i : part.wall) recorded[i] = kWall;
  for (std::size_t i = 0; i < X.size(); ++i) {
    std::string key = cell_of(part, X.x[i]);
    if (key != recorded[i]) c.recount_matches = false;
    if (key != kWall) {
      weight[key] += X.w[i];
      c.off_wall_weight += X.w[i];
    }
  }
  for (const auto& [key, wt] : weight) {
    c.max_cell_weight = std::max(c.max_cell_weight, wt);
    if (wt > 0) ++c.nonempty_cells;
  }
  c.bound = std::pow(1 + part.tol, part.s()) * std::ldexp(c.off_wall_weight, -part.s());
  c.holds = c.recount_matches && c.max_cell_weight <= c.bound * (1 + 1e-12) &&
            c.nonempty_cells <= (1LL << part.s());
  return c;
}

nlohmann::json Partition::to_json(const WeightedPointSet* X) const {
  nlohmann::json j;
  j["dim"] = dim;
  j["degree_budget"] = degree_budget;
  j["tol"] = tol;
  j["s"] = s();
  j["degree"] = degree();
  j["factors"] = nlohmann::json::array();
  j["factor_degrees"] = nlohmann::json::array();
  for (const auto& f : factors) {
    j["factors"].push_back(f.to_json());
    j["factor_degrees"].push_back(f.degree());
  }
  j["factor_nonsingular"] = factor_nonsingular;
  j["step_imbalance"] = step_imbalance;
  j["cells"] = nlohmann::json::object();
  j["histogram"] = nlohmann::json::object();
  std::size_t mx = 0;
  for (const auto& [key, idx] : cells) {
    j["cells"][key.empty() ? "-" : key] = idx;
    j["histogram"][key.empty() ? "-" : key] = idx.size();
    mx = std::max(mx, idx.size());
  }
  j["wall"] = wall;
  j["wall_count"] = wall.size();
  j["max_cell_count"] = mx;
  j["complete"] = complete;
  j["status"] = status;
  if (X) {
    auto c = certify_partition(*this, *X);
    j["certificate"] = {{"max_cell_weight", c.max_cell_weight}, {"off_wall_weight", c.off_wall_weight},
                        {"bound", c.bound},
                        {"nonempty_cells", c.nonempty_cells},
                        {"recount_matches", c.recount_matches},
                        {"holds", c.holds}};
  }
  return j;
}

bool line_in_zero_set(const Polynomial& P, const Vec3& base, const Vec3& dir, double scale) {
  const int d = std::max(P.degree(), 0);
  for (int i = 0; i <= d; ++i) {
    double t = d == 0 ? 0.0 : scale * (2.0 * i / d - 1.0);
    Vec3 x = base + t * dir;
    if (std::abs(P.eval(x)) >= zero_tolerance(P, x)) return false;
  }
  return true;
}

CrossingResult line_cell_crossings(const std::vector<Polynomial>& factors, const Vec3& base, const Vec3& dir,
                                   double t0, double t1) {
  if (!(t1 > t0)) usage_error("empty parameter interval");
  CrossingResult out;
  const Vec3 mid = base + (0.5 * (t0 + t1)) * dir;
  const double half = 0.5 * (t1 - t0);
  std::vector<double> breaks;
  for (const auto& P : factors) {
    if (line_in_zero_set(P, mid, dir, half)) {
      out.contained = true;
      return out;
    }
    auto c = P.restrict_to_line(base, dir);
    for (double t : real_roots(c, t0, t1))
      if (t > t0 && t < t1) breaks.push_back(t);
  }
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> knots{t0};
  knots.insert(knots.end(), breaks.begin(), breaks.end());
  knots.push_back(t1);
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (!(knots[i + 1] > knots[i])) continue;
    Vec3 x = base + (0.5 * (knots[i] + knots[i + 1])) * dir;
    std::string key;
    for (const auto& P : factors) key.push_back(P.eval(x) > 0 ? '+' : '-');
    if (out.cells.empty() || out.cells.back() != key) out.cells.push_back(key);
  }
  return out;
}

}  // namespace polylab
