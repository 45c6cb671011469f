#include "polylab/variety_tubes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

namespace polylab {

Tube Tube::make(const Vec3& center, const Vec3& dir, double radius, double length) {
  if (!(radius > 0) || !(length > 0)) usage_error("tube radius and length must be positive");
  return Tube{center, normalized(dir), radius, length};
}

double Tube::distance(const Vec3& x) const {
  double t = std::clamp(axial(x), -0.5 * length, 0.5 * length);
  return norm(x - (center + t * dir));
}

const char* tube_class_name(TubeClass c) {
  switch (c) {
    case TubeClass::tangent: return "TANGENT";
    case TubeClass::transverse: return "TRANSVERSE";
    case TubeClass::disjoint: return "DISJOINT";
  }
  return "?";
}

double line_angle(const Vec3& u, const Vec3& v) {
  double c = std::abs(dot(u, v)) / (norm(u) * norm(v));
  return std::acos(std::min(1.0, c));
}

namespace {

// Box around the k-fold dilate of the tube, clipped along the axis to [t_lo, t_hi].
OrientedBox tube_box(const Tube& T, double k, double t_lo, double t_hi, int nvars) {
  OrientedBox b;
  Vec3 d = T.dir;
  Vec3 u1, u2;
  if (nvars == 2) {
    if (std::abs(d[2]) > 1e-12) usage_error("planar tube must lie in the plane");
    u1 = Vec3{-d[1], d[0], 0};
    u2 = Vec3{0, 0, 1};
  } else {
    u1 = normalized(cross(d, std::abs(d[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    u2 = cross(d, u1);
  }
  b.axes = {d, u1, u2};
  b.center = T.center + (0.5 * (t_lo + t_hi)) * d;
  b.half = {0.5 * (t_hi - t_lo) + k * T.radius, k * T.radius, nvars == 2 ? 0.0 : k * T.radius};
  return b;
}

double angle_with(const std::vector<Polynomial>& grad, const Vec3& z, const Vec3& v) {
  Vec3 g = eval_gradient(grad, z);
  return std::asin(std::min(1.0, std::abs(dot(g, v)) / norm(g)));
}

}  // namespace

TangencyReport classify_tube(const Tube& tube, const Polynomial& P, const Ball& ball, double angle_threshold,
                             const SampleOptions& opt) {
  if (P.is_zero()) usage_error("classify_tube with the zero polynomial");
  const double rho = tube.radius;
  const double spacing = opt.spacing > 0 ? opt.spacing : rho / 2;
  // Only the part of 10T inside 2B can carry witnesses.
  double tc = tube.axial(ball.center);
  double reach = 2 * ball.radius + 10 * rho;
  double t_lo = std::max(-0.5 * tube.length, tc - reach), t_hi = std::min(0.5 * tube.length, tc + reach);
  TangencyReport rep;
  if (t_lo > t_hi) return rep;
  auto samples = sample_zero_set(P, tube_box(tube, 10, t_lo, t_hi, P.num_vars()), spacing);
  auto grad = gradient(P);
  for (const auto& s : samples) {
    double d = tube.distance(s.x), db = norm(s.x - ball.center);
    if (d <= 2 * rho && db <= ball.radius + rho) ++rep.wall_samples;
    if (d > 10 * rho || db > 2 * ball.radius) continue;
    if (!s.nonsingular) continue;
    ++rep.witness_samples;
    double a = angle_with(grad, s.x, tube.dir);
    if (a > rep.max_angle || rep.witness_samples == 1) {
      rep.max_angle = a;
      rep.witness = s.x;
    }
  }
  if (rep.wall_samples == 0) {
    rep.cls = TubeClass::disjoint;
    return rep;
  }
  if (rep.witness_samples == 0)
    throw Error(ErrorCode::singular_only, "every zero-set sample near the tube is singular");
  if (rep.max_angle > angle_threshold) {
    rep.cls = TubeClass::transverse;
    rep.witness_angle = rep.max_angle;
  } else {
    rep.cls = TubeClass::tangent;
  }
  return rep;
}

int TubeSegmentation::index_of(double t) const {
  if (segments.empty()) return -1;
  double t0 = segments.front().first;
  int i = static_cast<int>(std::floor((t - t0) / segment_length));
  return std::clamp(i, 0, static_cast<int>(segments.size()) - 1);
}

TubeSegmentation segment_tube(const Tube& tube, double a) {
  if (!(a > 0)) usage_error("segment angle must be positive");
  TubeSegmentation s;
  s.segment_length = tube.radius / a;
  double t = -0.5 * tube.length, end = 0.5 * tube.length;
  while (t < end) {
    double next = std::min(end, t + s.segment_length);
    // a sliver shorter than 1e-12 of the segment merges into its predecessor
    if (end - next < 1e-12 * s.segment_length) next = end;
    s.segments.emplace_back(t, next);
    t = next;
  }
  return s;
}

SegmentCount transverse_segment_count(const Tube& tube, const Polynomial& Q, double a, const SampleOptions& opt) {
  if (!(a > 0 && a <= 0.1 + 1e-15)) usage_error("segment angle must lie in (0, 1/10]");
  if (Q.is_zero()) usage_error("segment count with the zero polynomial");
  const double spacing = opt.spacing > 0 ? opt.spacing : tube.radius / 2;
  auto seg = segment_tube(tube, a);
  auto samples =
      sample_zero_set(Q, tube_box(tube, 1, -0.5 * tube.length, 0.5 * tube.length, Q.num_vars()), spacing);
  auto grad = gradient(Q);
  SegmentCount out;
  out.segments = static_cast<int>(seg.segments.size());
  std::set<int> occupied;
  int inside = 0, nonsingular = 0;
  for (const auto& s : samples) {
    if (!tube.contains(s.x)) continue;
    ++inside;
    if (!s.nonsingular) continue;
    ++nonsingular;
    if (angle_with(grad, s.x, tube.dir) < a) continue;
    ++out.survivors;
    occupied.insert(seg.index_of(tube.axial(s.x)));
  }
  if (inside > 0 && nonsingular == 0)
    throw Error(ErrorCode::singular_only, "every zero-set sample in the tube is singular");
  out.occupied = static_cast<int>(occupied.size());
  return out;
}

std::vector<char> cubes_meeting_zero_set(const Polynomial& P, const std::vector<int>& dims,
                                         const CubeCountOptions& opt) {
  if (P.is_zero()) usage_error("cube count of the zero polynomial");
  const int n = P.num_vars();
  if (static_cast<int>(dims.size()) != n) usage_error("grid dimensions must match the number of variables");
  for (int d : dims)
    if (d < 1) usage_error("grid dimensions must be positive");
  if (opt.subsample < 2) usage_error("subsample must be at least 2");
  const int m = opt.subsample - 1;  // lattice steps per unit
  std::array<int, 3> N{1, 1, 1}, C{1, 1, 1};
  for (int k = 0; k < n; ++k) {
    N[k] = dims[k] * m + 1;
    C[k] = dims[k];
  }
  // Lattice values, one slab of x_1 at a time per worker.
  auto idx = [&](int i, int j, int l) { return (static_cast<std::size_t>(i) * N[1] + j) * N[2] + l; };
  std::vector<double> val(static_cast<std::size_t>(N[0]) * N[1] * N[2]);
  std::vector<char> zero(val.size());
  const int jobs = std::max(1, opt.jobs);
  auto fill = [&](int w) {
    for (int i = w; i < N[0]; i += jobs)
      for (int j = 0; j < N[1]; ++j)
        for (int l = 0; l < N[2]; ++l) {
          Vec3 x{static_cast<double>(i) / m, n > 1 ? static_cast<double>(j) / m : 0.0,
                 n > 2 ? static_cast<double>(l) / m : 0.0};
          double v = P.eval(x);
          val[idx(i, j, l)] = v;
          zero[idx(i, j, l)] = std::abs(v) < zero_tolerance(P, x);
        }
  };
  std::vector<char> hits(static_cast<std::size_t>(C[0]) * C[1] * C[2], 0);
  auto count = [&](int w) {
    for (int ci = w; ci < C[0]; ci += jobs)
      for (int cj = 0; cj < C[1]; ++cj)
        for (int cl = 0; cl < C[2]; ++cl) {
          bool pos = false, neg = false, hit = false;
          int mj = n > 1 ? m : 0, ml = n > 2 ? m : 0;
          for (int a = 0; a <= m && !hit; ++a)
            for (int b = 0; b <= mj && !hit; ++b)
              for (int c = 0; c <= ml && !hit; ++c) {
                std::size_t k = idx(ci * m + a, cj * m + b, cl * m + c);
                if (zero[k]) hit = true;
                (val[k] > 0 ? pos : neg) = true;
                if (pos && neg) hit = true;
              }
          if (hit) hits[(static_cast<std::size_t>(ci) * C[1] + cj) * C[2] + cl] = 1;
        }
  };
  if (jobs == 1) {
    fill(0);
    count(0);
  } else {
    std::vector<std::thread> th;
    for (int w = 0; w < jobs; ++w) th.emplace_back(fill, w);
    for (auto& t : th) t.join();
    th.clear();
    for (int w = 0; w < jobs; ++w) th.emplace_back(count, w);
    for (auto& t : th) t.join();
  }
  return hits;
}

long long count_cubes_meeting_zero_set(const Polynomial& P, const std::vector<int>& dims,
                                       const CubeCountOptions& opt) {
  auto hits = cubes_meeting_zero_set(P, dims, opt);
  return std::count(hits.begin(), hits.end(), 1);
}

CensusResult tangent_direction_census(const std::vector<Tube>& tubes, const Polynomial& P, const Ball& ball,
                                      double rho, double L, double angle_sep, const SampleOptions& opt) {
  if (!(angle_sep > 0)) usage_error("angle separation must be positive");
  if (!(rho > 0 && L > rho)) usage_error("need 0 < rho < L");
  CensusResult out;
  const double threshold = rho / L;
  std::vector<Vec3> chosen;
  for (std::size_t i = 0; i < tubes.size(); ++i) {
    TangencyReport r;
    try {
      r = classify_tube(tubes[i], P, ball, threshold, opt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_only) throw;
      continue;
    }
    if (r.cls == TubeClass::transverse) ++out.transverse;
    if (r.cls == TubeClass::disjoint) ++out.disjoint;
    if (r.cls != TubeClass::tangent) continue;
    ++out.tangent;
    bool separated = true;
    for (const auto& c : chosen)
      if (line_angle(c, tubes[i].dir) < angle_sep) separated = false;
    if (!separated) continue;
    chosen.push_back(tubes[i].dir);
    out.selected.push_back(static_cast<int>(i));
  }
  out.census = static_cast<int>(chosen.size());
  double lg = std::log(L / rho);
  double D = std::max(1, P.degree());
  out.bound = D * D * lg * lg * L / rho;
  return out;
}

}  // namespace polylab
