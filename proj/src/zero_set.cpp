#include "polylab/zero_set.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace polylab {

OrientedBox OrientedBox::aligned(const Box& b) {
  OrientedBox o;
  for (int k = 0; k < 3; ++k) {
    o.center[k] = 0.5 * (b.lo[k] + b.hi[k]);
    o.half[k] = 0.5 * (b.hi[k] - b.lo[k]);
  }
  return o;
}

bool OrientedBox::contains(const Vec3& x, double slack) const {
  Vec3 d = x - center;
  for (int k = 0; k < 3; ++k)
    if (std::abs(dot(d, axes[k])) > half[k] + slack) return false;
  return true;
}

bool project_to_zero_set(const Polynomial& P, const std::vector<Polynomial>& grad, Vec3& x, int max_iter) {
  for (int it = 0; it < max_iter; ++it) {
    double f = P.eval(x);
    if (std::abs(f) <= zero_tolerance(P, x)) return true;
    Vec3 g = eval_gradient(grad, x);
    double g2 = dot(g, g);
    if (g2 == 0.0) return false;
    x = x - (f / g2) * g;
  }
  return std::abs(P.eval(x)) <= zero_tolerance(P, x);
}

namespace {

struct KeyHash {
  std::size_t operator()(const std::array<long long, 3>& k) const {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(k[0]));
    h = mix64(h ^ static_cast<std::uint64_t>(k[1]));
    return mix64(h ^ static_cast<std::uint64_t>(k[2]));
  }
};

// Illinois regula falsi on the segment a + s (b - a), s in [0, 1].
bool edge_root(const Polynomial& P, const Vec3& a, const Vec3& b, double fa, double fb, Vec3& out) {
  double s0 = 0.0, s1 = 1.0;
  int side = 0;
  for (int it = 0; it < 100; ++it) {
    double s = (s0 * fb - s1 * fa) / (fb - fa);
    if (!(s > s0 && s < s1)) s = 0.5 * (s0 + s1);
    Vec3 x = a + s * (b - a);
    double f = P.eval(x);
    if (std::abs(f) <= zero_tolerance(P, x) || s1 - s0 < 1e-16) {
      out = x;
      return std::abs(f) <= zero_tolerance(P, x);
    }
    if ((f < 0) == (fa < 0)) {
      s0 = s;
      fa = f;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      s1 = s;
      fb = f;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return false;
}

}  // namespace

std::vector<ZeroSample> sample_zero_set(const Polynomial& P, const OrientedBox& region_in, double spacing) {
  if (P.is_zero()) usage_error("zero set of the zero polynomial");
  if (!(spacing > 0)) usage_error("sampling spacing must be positive");
  OrientedBox region = region_in;
  for (int k = P.num_vars(); k < 3; ++k) {
    region.half[k] = 0.0;
    region.center[k] = 0.0;
  }
  if (P.num_vars() < 3) {
    for (int k = 0; k < 3; ++k)
      for (int c = P.num_vars(); c < 3; ++c)
        if (region.half[k] > 0 && region.axes[k][c] != 0.0) usage_error("sampling box leaves the polynomial's space");
  }
  std::array<int, 3> n{};
  std::array<double, 3> step{};
  for (int k = 0; k < 3; ++k) {
    if (region.half[k] <= 0) {
      n[k] = 1;
      step[k] = 0;
    } else {
      n[k] = static_cast<int>(std::ceil(2 * region.half[k] / spacing)) + 1;
      step[k] = 2 * region.half[k] / (n[k] - 1);
    }
  }
  auto node = [&](int i, int j, int l) {
    Vec3 x = region.center;
    int idx[3] = {i, j, l};
    for (int k = 0; k < 3; ++k)
      if (n[k] > 1) x = x + (-region.half[k] + idx[k] * step[k]) * region.axes[k];
    return x;
  };
  const std::size_t total = static_cast<std::size_t>(n[0]) * n[1] * n[2];
  std::vector<double> val(total);
  auto at = [&](int i, int j, int l) { return (static_cast<std::size_t>(i) * n[1] + j) * n[2] + l; };
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int l = 0; l < n[2]; ++l) val[at(i, j, l)] = P.eval(node(i, j, l));

  auto grad = gradient(P);
  const double floor = singular_floor(P);
  std::vector<ZeroSample> out;
  std::unordered_set<std::array<long long, 3>, KeyHash> seen;
  auto accept = [&](const Vec3& x) {
    if (!region.contains(x, 1e-12 * (1 + norm(region.half)))) return;
    Vec3 d = x - region.center;
    std::array<long long, 3> key{};
    for (int k = 0; k < 3; ++k) key[k] = static_cast<long long>(std::floor(dot(d, region.axes[k]) / spacing));
    if (!seen.insert(key).second) return;
    Vec3 g = eval_gradient(grad, x);
    double gn = norm(g);
    out.push_back({x, gn, gn >= floor});
  };
  for (int i = 0; i < n[0]; ++i)
    for (int j = 0; j < n[1]; ++j)
      for (int l = 0; l < n[2]; ++l) {
        double f = val[at(i, j, l)];
        Vec3 x = node(i, j, l);
        if (std::abs(f) <= zero_tolerance(P, x)) {
          accept(x);
          continue;
        }
        const int nb[3][3] = {{i + 1, j, l}, {i, j + 1, l}, {i, j, l + 1}};
        for (int k = 0; k < 3; ++k) {
          int a = nb[k][0], b = nb[k][1], c = nb[k][2];
          if (a >= n[0] || b >= n[1] || c >= n[2]) continue;
          double g = val[at(a, b, c)];
          if (g == 0.0 || (f < 0) == (g < 0)) continue;
          Vec3 y = node(a, b, c);
          if (std::abs(g) <= zero_tolerance(P, y)) continue;
          Vec3 z = 0.5 * (x + y);
          if (edge_root(P, x, y, f, g, z) || project_to_zero_set(P, grad, z)) accept(z);
        }
      }
  return out;
}

std::vector<ZeroSample> sample_zero_set(const Polynomial& P, const Box& region, double spacing) {
  return sample_zero_set(P, OrientedBox::aligned(region), spacing);
}

Polynomial perturb_nonsingular(const Polynomial& p, std::uint64_t seed, double magnitude, const PerturbOptions& opt) {
  if (p.is_zero()) usage_error("perturbing the zero polynomial");
  // A perturbation that empties a sampled zero set is rejected.
  const bool had_zeros = !sample_zero_set(p, opt.region, opt.spacing).empty();
  auto verified = [&](const Polynomial& q) {
    double fl = opt.floor > 0 ? opt.floor : singular_floor(q);
    auto samples = sample_zero_set(q, opt.region, opt.spacing);
    if (had_zeros && samples.empty()) return false;
    for (const auto& s : samples)
      if (s.grad_norm < fl) return false;
    return true;
  };
  if (magnitude <= 0.0) {
    if (verified(p)) return p;
    throw Error(ErrorCode::perturbation_failed, "polynomial is singular on the sample and magnitude is zero");
  }
  Rng rng = make_rng(seed, 0x5eed);
  for (int attempt = 0; attempt < opt.max_retries; ++attempt) {
    double h = uniform(rng, 0.5 * magnitude, magnitude);
    if (uniform(rng) < 0.5) h = -h;
    Polynomial q = p - Polynomial::constant(p.num_vars(), h);
    if (verified(q)) return q;
  }
  throw Error(ErrorCode::perturbation_failed, "no regular value found within the retry budget");
}

}  // namespace polylab
