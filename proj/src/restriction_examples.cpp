#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "fft_util.hpp"
#include "parallel.hpp"
#include "polylab/restriction.hpp"

namespace polylab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSignificant = 0.3;

double axis_dist(const Vec3& x, const Vec3& anchor, const Vec3& dir) {
  const Vec3 d = x - anchor;
  return norm(d - dot(d, dir) * dir);
}

double max_gradient(const SurfaceSpec& S, const std::vector<ExamplePacket>& pk) {
  double g = 0;
  for (const auto& p : pk)
    for (int q = 0; q < 16; ++q) {
      const double a = 2 * kPi * q / 16;
      const Vec2 gr = S.grad(p.cap[0] + p.cap_radius * std::cos(a), p.cap[1] + p.cap_radius * std::sin(a));
      g = std::max(g, std::hypot(gr[0], gr[1]));
    }
  return g;
}

FreqField block_for(const std::vector<ExamplePacket>& pk, double dw) {
  double lo1 = 1e300, hi1 = -1e300, lo2 = 1e300, hi2 = -1e300;
  for (const auto& p : pk) {
    lo1 = std::min(lo1, p.cap[0] - p.cap_radius);
    hi1 = std::max(hi1, p.cap[0] + p.cap_radius);
    lo2 = std::min(lo2, p.cap[1] - p.cap_radius);
    hi2 = std::max(hi2, p.cap[1] + p.cap_radius);
  }
  return FreqField::covering(dw, lo1, hi1, lo2, hi2);
}

void finish(const SurfaceSpec& S, ExampleField& ex) {
  ex.l2 = l2_norm(S, ex.f);
  ex.linf = linf_norm(ex.f);
}

// Compacts tau cells (sorted) to labels.
void assign_labels(std::vector<ExamplePacket>& pk, ExampleField& ex, int K) {
  std::map<int, int> cells;
  for (const auto& p : pk) cells.emplace(tau_cell(p.cap, K), 0);
  int n = 0;
  for (auto& [cell, lab] : cells) {
    lab = n++;
    ex.label_centers.push_back(tau_center(cell, K));
  }
  for (auto& p : pk) p.label = cells.at(tau_cell(p.cap, K));
  ex.num_labels = n;
}

void build_field(const SurfaceSpec& S, ExampleField& ex, std::vector<ExamplePacket> pk, double dw) {
  ex.f = block_for(pk, dw);
  ex.label.assign(ex.f.size(), -1);
  for (const auto& p : pk) add_packet(S, ex, p, ex.R);
  ex.packets = std::move(pk);
  finish(S, ex);
}

struct SliceRows {
  double x3 = 0;
  std::vector<double> x2;
  int i_lo = 0, i_hi = -1;
};

SliceRows slice_rows(const EvalRegion& region, double x3, double dx) {
  SliceRows s;
  s.x3 = x3;
  const double rr = region.R * region.R - x3 * x3;
  if (rr < 0) return s;
  const double rad = std::sqrt(rr);
  auto [lo, hi] = region.x2_range(x3);
  lo = std::max(lo, -rad);
  hi = std::min(hi, rad);
  const int jl = static_cast<int>(std::ceil(lo / dx - 1e-9)), jh = static_cast<int>(std::floor(hi / dx + 1e-9));
  double min2 = 1e300;
  for (int j = jl; j <= jh; ++j) {
    s.x2.push_back(j * dx);
    min2 = std::min(min2, (j * dx) * (j * dx));
  }
  if (s.x2.empty()) return s;
  const double xr = std::sqrt(std::max(0.0, rr - min2));
  s.i_lo = static_cast<int>(std::ceil(-xr / dx - 1e-9));
  s.i_hi = static_cast<int>(std::floor(xr / dx + 1e-9));
  return s;
}

int slice_count(double R, double dx, int& l0) {
  l0 = static_cast<int>(std::ceil(-R / dx - 1e-9));
  return static_cast<int>(std::floor(R / dx + 1e-9)) - l0 + 1;
}

double geo_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += std::log(x);
  return std::exp(s / static_cast<double>(v.size()));
}

std::string fmt(double x) {
  std::ostringstream o;
  o.precision(10);
  o << x;
  return o.str();
}

double box_dx(double dw) {
  const double P = 2 * kPi / dw;
  return P / detail::nice_size(static_cast<int>(std::ceil(P - 1e-9)));
}

}  // namespace

nlohmann::json ExampleField::summary() const {
  nlohmann::json j;
  j["kind"] = kind;
  j["R"] = R;
  j["dw"] = f.dw;
  j["block"] = {f.n1, f.n2};
  j["num_labels"] = num_labels;
  j["packets"] = packets.size();
  j["tube_radius"] = tube_radius;
  j["f_l2"] = l2;
  j["f_linf"] = linf;
  double mis = 0;
  for (const auto& p : packets) mis = std::max(mis, p.mismatch);
  j["max_mismatch_angle"] = mis;
  j["meta"] = meta;
  return j;
}

int tau_cell(const Vec2& w, int K) {
  auto idx = [K](double t) { return std::clamp(static_cast<int>(std::floor((t + 1) * K / 2)), 0, K - 1); };
  return idx(w[0]) * K + idx(w[1]);
}

Vec2 tau_center(int cell, int K) {
  return {(cell / K + 0.5) * 2.0 / K - 1, (cell % K + 0.5) * 2.0 / K - 1};
}

void add_packet(const SurfaceSpec& S, ExampleField& ex, const ExamplePacket& pk, double amp) {
  FreqField& f = ex.f;
  if (ex.label.size() != f.size()) ex.label.assign(f.size(), -1);
  const double r = pk.cap_radius;
  const int i0 = static_cast<int>(std::floor((pk.cap[0] - r) / f.dw)) - f.k1;
  const int i1 = static_cast<int>(std::ceil((pk.cap[0] + r) / f.dw)) - f.k1;
  const int j0 = static_cast<int>(std::floor((pk.cap[1] - r) / f.dw)) - f.k2;
  const int j1 = static_cast<int>(std::ceil((pk.cap[1] + r) / f.dw)) - f.k2;
  for (int i = std::max(0, i0); i <= std::min(f.n1 - 1, i1); ++i)
    for (int j = std::max(0, j0); j <= std::min(f.n2 - 1, j1); ++j) {
      const double w1 = f.w1(i), w2 = f.w2(j);
      const double b = bump(std::hypot(w1 - pk.cap[0], w2 - pk.cap[1]) / r);
      if (b == 0) continue;
      const std::size_t q = static_cast<std::size_t>(i) * f.n2 + j;
      if (ex.label[q] >= 0 && ex.label[q] != pk.label) usage_error("packets of different labels overlap");
      const double ph = -(pk.anchor[0] * w1 + pk.anchor[1] * w2 + pk.anchor[2] * S.height(w1, w2));
      f.f[q] += std::polar(amp * pk.sign * b, ph);
      ex.label[q] = pk.label;
    }
}

ExampleField build_planar_example(const SurfaceSpec& S, const PlanarOptions& opt) {
  const double R = opt.R;
  if (!(R >= 4)) usage_error("planar example needs R >= 4");
  const double sq = std::sqrt(R);
  if (opt.B < 1 || opt.B > sq) usage_error("B must lie in [1, R^1/2]");
  if (opt.K < 1) usage_error("K must be positive");
  const double r = 1 / sq, c = 1.0 / opt.K;

  std::vector<Vec2> cand;
  for (int j = -static_cast<int>(std::floor(opt.amax / (2 * r))); 2 * r * j <= opt.amax + 1e-12; ++j)
    cand.push_back({2 * r * j, c});
  if (cand.size() < 2) usage_error("amax too small for two caps");
  const Vec3 np = normalized(cross(S.normal(cand.front()[0], c), S.normal(cand.back()[0], c)));
  std::vector<Vec2> caps;
  for (const auto& w : cand)
    if (std::abs(dot(np, S.normal(w[0], w[1]))) <= r) caps.push_back(w);
  if (opt.force_cap >= 0) {
    if (opt.force_cap >= static_cast<int>(caps.size())) usage_error("force_cap out of range");
    caps = {caps[static_cast<std::size_t>(opt.force_cap)]};
  }

  const int slots = static_cast<int>(std::floor(sq + 1e-9));
  std::vector<ExamplePacket> pk;
  for (std::size_t k = 0; k < caps.size(); ++k) {
    Rng rng = make_rng(opt.seed, k, 17);
    std::vector<int> idx(static_cast<std::size_t>(slots));
    std::iota(idx.begin(), idx.end(), 0);
    const Vec3 v = S.normal(caps[k][0], caps[k][1]);
    const Vec3 u = normalized(cross(np, v));
    for (int b = 0; b < opt.B; ++b) {
      const int pick = b + static_cast<int>(rng() % static_cast<std::uint64_t>(slots - b));
      std::swap(idx[static_cast<std::size_t>(b)], idx[static_cast<std::size_t>(pick)]);
      const double s = -R + sq * (2 * idx[static_cast<std::size_t>(b)] + 1);
      ExamplePacket p;
      p.cap = caps[k];
      p.cap_radius = r;
      p.anchor = s * u;
      p.dir = v;
      p.sign = (rng() & 1) ? 1 : -1;
      pk.push_back(p);
    }
  }

  ExampleField ex;
  ex.kind = "planar";
  ex.R = R;
  ex.tube_radius = sq;
  assign_labels(pk, ex, opt.K);
  const double dw = required_dw(R + 3 * ex.tube_radius, max_gradient(S, pk));
  build_field(S, ex, std::move(pk), dw);
  ex.meta = {{"B", opt.B},
             {"K", opt.K},
             {"seed", opt.seed},
             {"caps", caps.size()},
             {"line_w2", c},
             {"plane_normal", {np[0], np[1], np[2]}},
             {"slab_half_width", sq},
             {"predicted_l2", std::sqrt(static_cast<double>(opt.B)) * std::pow(R, 0.75)}};
  return ex;
}

ExampleField build_regulus_example(const SurfaceSpec& S, const RegulusOptions& opt) {
  const double R = opt.R;
  if (!(R >= 64)) usage_error("regulus example needs R >= 64");
  if (!(opt.spacing > 0) || !(opt.patch > 0 && opt.patch <= 1) || !(opt.cap_radius > 0 && opt.cap_radius <= 0.5))
    usage_error("regulus options out of range");
  const double sq = std::sqrt(R), s = 1 / sq, h2 = std::sqrt(0.5);
  Rng rng = make_rng(opt.seed, 29);
  const double shift = uniform(rng);
  const double step = opt.spacing * sq;

  // Newton on grad h(w) = q from the paraboloid guess.
  auto match = [&](const Vec3& d) {
    const Vec2 q{-d[0] / d[2], -d[1] / d[2]};
    Vec2 w{q[0] / 2, q[1] / 2};
    for (int it = 0; it < 30; ++it) {
      const Vec2 g = S.grad(w[0], w[1]);
      const auto H = S.hessian(w[0], w[1]);
      const double det = H[0] * H[2] - H[1] * H[1];
      const double e1 = g[0] - q[0], e2 = g[1] - q[1];
      w[0] -= (H[2] * e1 - H[1] * e2) / det;
      w[1] -= (H[0] * e2 - H[1] * e1) / det;
      if (std::hypot(e1, e2) < 1e-14) break;
    }
    return w;
  };

  std::vector<ExamplePacket> pk;
  for (int fam = 0; fam < 2; ++fam) {
    if (!(opt.families & (1 << fam))) continue;
    const int kmax = static_cast<int>(std::floor(opt.patch * R / step + 1));
    for (int k = -kmax; k <= kmax; ++k) {
      const double a = (k + shift - 0.5) * step;
      if (std::abs(a) > opt.patch * R) continue;
      // Rulings of x3 = x1 x2 / R in the frame with rows (-1,1,0)/sqrt2, (0,0,1), (1,1,0)/sqrt2.
      const Vec3 d = fam == 0 ? normalized(Vec3{h2, a / R, h2}) : normalized(Vec3{-h2, a / R, h2});
      const Vec3 anchor = fam == 0 ? Vec3{-a * h2, 0, a * h2} : Vec3{a * h2, 0, a * h2};
      const Vec2 w = match(d);
      const Vec2 cap{(std::floor(w[0] / s) + 0.5) * s, (std::floor(w[1] / s) + 0.5) * s};
      if (std::hypot(cap[0], cap[1]) + opt.cap_radius * s > 1) usage_error("regulus cap leaves the unit disk");
      ExamplePacket p;
      p.cap = cap;
      p.cap_radius = opt.cap_radius * s;
      p.anchor = anchor;
      p.dir = S.normal(cap[0], cap[1]);
      p.family = fam;
      p.mismatch = std::acos(std::clamp(dot(p.dir, d), -1.0, 1.0));
      pk.push_back(p);
    }
  }
  if (pk.empty()) usage_error("no rulings selected");

  ExampleField ex;
  ex.kind = "regulus";
  ex.R = R;
  ex.tube_radius = 1 / (opt.cap_radius * s);
  assign_labels(pk, ex, opt.K);
  const double dw = required_dw(R + 3 * ex.tube_radius, max_gradient(S, pk));
  build_field(S, ex, std::move(pk), dw);
  ex.meta = {{"K", opt.K},
             {"seed", opt.seed},
             {"families", opt.families},
             {"patch", opt.patch},
             {"spacing", opt.spacing},
             {"cap_radius", opt.cap_radius},
             {"half_width", 0.5 * sq}};
  return ex;
}

EvalRegion slab_region(const ExampleField& ex, double hw) {
  const auto& jn = ex.meta.at("plane_normal");
  const Vec3 n{jn[0].get<double>(), jn[1].get<double>(), jn[2].get<double>()};
  if (std::abs(n[1]) < 0.5) usage_error("slab normal too far from the x2 axis");
  EvalRegion g;
  g.R = ex.R;
  const double R = ex.R;
  g.x2_range = [n, hw, R](double x3) {
    const double span = hw + std::abs(n[0]) * R;
    const double a = (-n[2] * x3 - span) / n[1], b = (-n[2] * x3 + span) / n[1];
    return std::make_pair(std::min(a, b), std::max(a, b));
  };
  g.contains = [n, hw](const Vec3& x) { return std::abs(dot(n, x)) <= hw; };
  return g;
}

EvalRegion regulus_region(const ExampleField& ex, double hw) {
  const double R = ex.R, lim = ex.meta.at("patch").get<double>() * R;
  const double h2 = std::sqrt(0.5);
  EvalRegion g;
  g.R = R;
  g.x2_range = [R, hw](double x3) { return std::make_pair((x3 * x3 - R * R) / (2 * R) - hw, x3 * x3 / (2 * R) + hw); };
  g.contains = [R, hw, lim, h2](const Vec3& x) {
    const double p1 = h2 * (x[2] - x[0]), p2 = h2 * (x[2] + x[0]);
    return std::abs(p1) <= lim && std::abs(p2) <= lim && std::abs(x[1] - p1 * p2 / R) <= hw;
  };
  return g;
}

RegionStats region_stats(const SurfaceSpec& S, const ExampleField& ex, const EvalRegion& region, double alpha,
                         const std::vector<double>& ps, int jobs) {
  if (!(alpha > 0)) usage_error("alpha must be positive");
  check_resolution(S, ex.f, region.R);
  SliceEvaluator se(S, ex.f, &ex.label, ex.num_labels, 1.0);
  const double dx = se.dx(), dv = dx * dx * dx;
  int l0 = 0;
  const int nl = slice_count(region.R, dx, l0);
  std::vector<RegionStats> part(static_cast<std::size_t>(nl));
  detail::parallel_for(nl, jobs, [&](int l, int) {
    RegionStats& st = part[static_cast<std::size_t>(l)];
    st.broad_pow.assign(ps.size(), 0.0);
    st.all_pow.assign(ps.size(), 0.0);
    const SliceRows rows = slice_rows(region, (l0 + l) * dx, dx);
    if (rows.x2.empty() || rows.i_hi < rows.i_lo) return;
    std::vector<std::vector<cplx>> out;
    se.eval(rows.x3, rows.i_lo, rows.i_hi, rows.x2, out);
    const int ni = rows.i_hi - rows.i_lo + 1;
    const double R2 = region.R * region.R;
    for (std::size_t r = 0; r < rows.x2.size(); ++r)
      for (int i = 0; i < ni; ++i) {
        const Vec3 x{(rows.i_lo + i) * dx, rows.x2[r], rows.x3};
        if (dot(x, x) > R2 || !region.contains(x)) continue;
        const std::size_t q = r * static_cast<std::size_t>(ni) + static_cast<std::size_t>(i);
        cplx e = 0;
        double mt = 0;
        for (const auto& o : out) {
          e += o[q];
          mt = std::max(mt, std::abs(o[q]));
        }
        const double a = std::abs(e);
        const bool b = is_broad(a, mt, alpha);
        const double br = b ? a : 0.0;
        ++st.points;
        st.broad_points += b;
        st.identity_violations += !broad_narrow_holds(a, br, mt, alpha);
        if (a >= kSignificant) {
          ++st.significant;
          st.significant_broad += b;
        }
        st.l2sq += a * a * dv;
        for (std::size_t k = 0; k < ps.size(); ++k) {
          const double ap = std::pow(a, ps[k]) * dv;
          st.all_pow[k] += ap;
          if (b) st.broad_pow[k] += ap;
        }
      }
  });
  RegionStats tot;
  tot.p = ps;
  tot.dx = dx;
  tot.broad_pow.assign(ps.size(), 0.0);
  tot.all_pow.assign(ps.size(), 0.0);
  for (const auto& st : part) {
    if (st.points == 0) continue;
    for (std::size_t k = 0; k < ps.size(); ++k) {
      tot.broad_pow[k] += st.broad_pow[k];
      tot.all_pow[k] += st.all_pow[k];
    }
    tot.l2sq += st.l2sq;
    tot.points += st.points;
    tot.broad_points += st.broad_points;
    tot.identity_violations += st.identity_violations;
    tot.significant += st.significant;
    tot.significant_broad += st.significant_broad;
  }
  return tot;
}

double tube_overlap_fraction(const ExampleField& ex, const EvalRegion& region, double need, double dx) {
  int fams = 0;
  for (const auto& p : ex.packets) fams |= 1 << p.family;
  int l0 = 0;
  const int nl = slice_count(region.R, dx, l0);
  long long total = 0, hit = 0;
  const double R2 = region.R * region.R;
  for (int l = 0; l < nl; ++l) {
    const SliceRows rows = slice_rows(region, (l0 + l) * dx, dx);
    for (double x2 : rows.x2)
      for (int i = rows.i_lo; i <= rows.i_hi; ++i) {
        const Vec3 x{i * dx, x2, rows.x3};
        if (dot(x, x) > R2 || !region.contains(x)) continue;
        ++total;
        int count = 0, seen = 0;
        for (const auto& p : ex.packets)
          if (axis_dist(x, p.anchor, p.dir) <= ex.tube_radius) {
            ++count;
            seen |= 1 << p.family;
          }
        hit += need > 0 ? count >= need : seen == fams;
      }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

nlohmann::json LineFit::to_json() const {
  return {{"slope", slope}, {"intercept", intercept}, {"max_residual", max_residual}};
}

LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) usage_error("a fit needs at least two points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(x[k] > 0) || !(y[k] > 0)) usage_error("log-log fit needs positive data");
    const double a = std::log(x[k]), b = std::log(y[k]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double d = static_cast<double>(n) * sxx - sx * sx;
  if (d == 0) usage_error("log-log fit needs distinct abscissae");
  LineFit f;
  f.slope = (static_cast<double>(n) * sxy - sx * sy) / d;
  f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k)
    f.max_residual =
        std::max(f.max_residual, std::abs(std::log(y[k]) - f.intercept - f.slope * std::log(x[k])));
  return f;
}

nlohmann::json ScalingOptions::to_json() const {
  return {{"example", example}, {"R_list", R_list}, {"p_list", p_list}, {"alpha", alpha}, {"K", K},
          {"B", B},             {"seed", seed},     {"trials", trials}, {"jobs", jobs}};
}

nlohmann::json ScalingReport::to_json() const {
  nlohmann::json j;
  j["config"] = opt.to_json();
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"R", r.R},
                         {"trials", r.trials},
                         {"lhs_norm", r.lhs},
                         {"f_l2", r.f_l2},
                         {"f_linf", r.f_linf},
                         {"rhs", r.rhs},
                         {"ratio", r.ratio},
                         {"broad_fraction", r.broad_fraction},
                         {"points", r.points},
                         {"identity_violations", r.identity_violations}});
  nlohmann::json fits;
  for (std::size_t k = 0; k < opt.p_list.size() && k < lhs_fit.size(); ++k)
    fits.push_back({{"p", opt.p_list[k]}, {"lhs", lhs_fit[k].to_json()}, {"ratio", ratio_fit[k].to_json()}});
  j["fits"] = fits;
  j["rhs_fit"] = rhs_fit.to_json();
  j["l2_fit"] = l2_fit.to_json();
  j["linf_fit"] = linf_fit.to_json();
  j["csv"] = csv();
  return j;
}

std::string ScalingReport::csv() const {
  std::ostringstream o;
  o << "R,trials";
  for (double p : opt.p_list) o << ",lhs_norm_p" << fmt(p);
  o << ",f_l2,f_linf,rhs";
  for (double p : opt.p_list) o << ",ratio_p" << fmt(p);
  o << ",broad_fraction\n";
  for (const auto& r : rows) {
    o << fmt(r.R) << ',' << r.trials;
    for (double v : r.lhs) o << ',' << fmt(v);
    o << ',' << fmt(r.f_l2) << ',' << fmt(r.f_linf) << ',' << fmt(r.rhs);
    for (double v : r.ratio) o << ',' << fmt(v);
    o << ',' << fmt(r.broad_fraction) << '\n';
  }
  o << "fit,p,slope,intercept,max_residual\n";
  for (std::size_t k = 0; k < lhs_fit.size(); ++k) {
    o << "lhs," << fmt(opt.p_list[k]) << ',' << fmt(lhs_fit[k].slope) << ',' << fmt(lhs_fit[k].intercept) << ','
      << fmt(lhs_fit[k].max_residual) << '\n';
    o << "ratio," << fmt(opt.p_list[k]) << ',' << fmt(ratio_fit[k].slope) << ',' << fmt(ratio_fit[k].intercept)
      << ',' << fmt(ratio_fit[k].max_residual) << '\n';
  }
  for (const auto& [name, f] : {std::pair{"rhs", &rhs_fit}, {"f_l2", &l2_fit}, {"f_linf", &linf_fit}})
    o << name << ",," << fmt(f->slope) << ',' << fmt(f->intercept) << ',' << fmt(f->max_residual) << '\n';
  return o.str();
}

ScalingReport scaling_experiment(const SurfaceSpec& S, const ScalingOptions& opt) {
  if (opt.R_list.size() < 4) usage_error("scaling needs at least four R values");
  for (std::size_t k = 1; k < opt.R_list.size(); ++k)
    if (!(opt.R_list[k] > opt.R_list[k - 1])) usage_error("R_list must be strictly ascending");
  if (opt.p_list.empty()) usage_error("p_list is empty");
  if (opt.trials < 1) usage_error("trials must be positive");
  if (opt.example != "planar" && opt.example != "regulus") usage_error("unknown example: " + opt.example);
  ScalingReport rep;
  rep.opt = opt;
  const double Rmax = opt.R_list.back();
  for (double R : opt.R_list) {
    ScalingRow row;
    row.R = R;
    row.trials = opt.trials * std::max(1, static_cast<int>(std::lround(Rmax / R)));
    std::vector<std::vector<double>> lhs(opt.p_list.size());
    std::vector<double> l2, linf;
    long long sig = 0, sigb = 0;
    for (int t = 0; t < row.trials; ++t) {
      const std::uint64_t seed = derive_seed(opt.seed, static_cast<std::uint64_t>(R), static_cast<std::uint64_t>(t));
      ExampleField ex;
      EvalRegion region;
      if (opt.example == "planar") {
        PlanarOptions po;
        po.R = R;
        po.B = opt.B;
        po.K = opt.K;
        po.seed = seed;
        ex = build_planar_example(S, po);
        region = slab_region(ex, 3 * std::sqrt(R));
      } else {
        RegulusOptions ro;
        ro.R = R;
        ro.K = opt.K;
        ro.seed = seed;
        ex = build_regulus_example(S, ro);
        region = regulus_region(ex, ex.meta.at("half_width").get<double>());
      }
      const RegionStats st = region_stats(S, ex, region, opt.alpha, opt.p_list, opt.jobs);
      for (std::size_t k = 0; k < opt.p_list.size(); ++k) {
        if (!(st.broad_pow[k] > 0)) usage_error("no broad points at R = " + fmt(R) + "; raise alpha");
        lhs[k].push_back(st.broad_norm(k));
      }
      l2.push_back(ex.l2);
      linf.push_back(ex.linf);
      row.points += st.points;
      row.identity_violations += st.identity_violations;
      sig += st.significant;
      sigb += st.significant_broad;
    }
    row.f_l2 = geo_mean(l2);
    row.f_linf = geo_mean(linf);
    row.rhs = std::pow(row.f_l2, 12.0 / 13.0) * std::pow(row.f_linf, 1.0 / 13.0);
    for (auto& v : lhs) {
      row.lhs.push_back(geo_mean(v));
      row.ratio.push_back(row.lhs.back() / row.rhs);
    }
    row.broad_fraction = sig ? static_cast<double>(sigb) / static_cast<double>(sig) : 0.0;
    rep.rows.push_back(row);
  }
  std::vector<double> Rs, rhs, l2, linf;
  for (const auto& r : rep.rows) {
    Rs.push_back(r.R);
    rhs.push_back(r.rhs);
    l2.push_back(r.f_l2);
    linf.push_back(r.f_linf);
  }
  for (std::size_t k = 0; k < opt.p_list.size(); ++k) {
    std::vector<double> a, b;
    for (const auto& r : rep.rows) {
      a.push_back(r.lhs[k]);
      b.push_back(r.ratio[k]);
    }
    rep.lhs_fit.push_back(fit_loglog(Rs, a));
    rep.ratio_fit.push_back(fit_loglog(Rs, b));
  }
  rep.rhs_fit = fit_loglog(Rs, rhs);
  rep.l2_fit = fit_loglog(Rs, l2);
  rep.linf_fit = fit_loglog(Rs, linf);
  return rep;
}

// ---- bilinear ----

BilinearInstance two_packet_instance(const SurfaceSpec& S, double R, double separation, std::uint64_t seed) {
  if (!(R >= 16)) usage_error("bilinear instance needs R >= 16");
  const double r = 1 / std::sqrt(R);
  if (!(separation > 2 * r) || separation / 2 + r > 1) usage_error("separation must lie in (2 R^-1/2, 2 - 2 R^-1/2]");
  Rng rng = make_rng(seed, 41);
  const double phi = uniform(rng, 0, 2 * kPi);
  const Vec2 e{std::cos(phi), std::sin(phi)};
  BilinearInstance inst;
  inst.R = R;
  std::vector<ExamplePacket> pk(2);
  for (int k = 0; k < 2; ++k) {
    const double t = (k == 0 ? -0.5 : 0.5) * separation;
    pk[k].cap = {t * e[0], t * e[1]};
    pk[k].cap_radius = r;
    pk[k].dir = S.normal(pk[k].cap[0], pk[k].cap[1]);
  }
  inst.angle = std::acos(std::clamp(dot(pk[0].dir, pk[1].dir), -1.0, 1.0));
  inst.box_half = std::min(R, 6 * std::sqrt(R) / std::sin(inst.angle));
  const double dw = required_dw(std::sqrt(3.0) * inst.box_half + 3 * std::sqrt(R), max_gradient(S, pk));
  for (int k = 0; k < 2; ++k) {
    ExampleField& ex = k == 0 ? inst.f1 : inst.f2;
    ex.kind = "packet";
    ex.R = R;
    ex.tube_radius = std::sqrt(R);
    ex.num_labels = 1;
    ex.label_centers = {pk[k].cap};
    build_field(S, ex, {pk[k]}, dw);
  }
  return inst;
}

std::vector<Cube> wall_cubes(const BilinearInstance& inst) {
  const double dx = box_dx(inst.f1.f.dw), H = inst.box_half, side = std::sqrt(inst.R);
  const auto& p1 = inst.f1.packets.at(0);
  const auto& p2 = inst.f2.packets.at(0);
  const int lo = static_cast<int>(std::ceil(-H / dx - 1e-9)), hi = static_cast<int>(std::floor(H / dx + 1e-9));
  std::map<std::array<long long, 3>, int> seen;
  for (int l = lo; l <= hi; ++l)
    for (int j = lo; j <= hi; ++j)
      for (int i = lo; i <= hi; ++i) {
        const Vec3 x{i * dx, j * dx, l * dx};
        if (axis_dist(x, p1.anchor, p1.dir) > inst.f1.tube_radius) continue;
        if (axis_dist(x, p2.anchor, p2.dir) > inst.f2.tube_radius) continue;
        seen[{static_cast<long long>(std::floor(x[0] / side)), static_cast<long long>(std::floor(x[1] / side)),
              static_cast<long long>(std::floor(x[2] / side))}] = 1;
      }
  std::vector<Cube> out;
  for (const auto& [k, v] : seen) out.push_back({{k[0] * side, k[1] * side, k[2] * side}, side});
  return out;
}

BilinearRow bilinear_l4_check(const SurfaceSpec& S, const BilinearInstance& inst, const std::vector<Cube>& cubes,
                              int jobs) {
  if (inst.f1.f.dw != inst.f2.f.dw) usage_error("bilinear fields must share the frequency lattice");
  const double H = inst.box_half;
  check_resolution(S, inst.f1.f, std::sqrt(3.0) * H);
  check_resolution(S, inst.f2.f, std::sqrt(3.0) * H);
  SliceEvaluator e1(S, inst.f1.f, nullptr, 1, 1.0), e2(S, inst.f2.f, nullptr, 1, 1.0);
  const double dx = e1.dx(), dv = dx * dx * dx;
  const double side = cubes.empty() ? std::sqrt(inst.R) : cubes.front().side;
  std::map<std::array<long long, 3>, int> index;
  for (std::size_t c = 0; c < cubes.size(); ++c) {
    std::array<long long, 3> k{};
    for (int a = 0; a < 3; ++a) {
      const double t = cubes[c].lo[a] / side;
      k[a] = std::llround(t);
      if (std::abs(t - static_cast<double>(k[a])) > 1e-9 || cubes[c].side != side)
        usage_error("cubes must lie on one lattice");
    }
    index[k] = static_cast<int>(c);
  }
  const auto& p1 = inst.f1.packets.at(0);
  const auto& p2 = inst.f2.packets.at(0);
  const int lo = static_cast<int>(std::ceil(-H / dx - 1e-9)), hi = static_cast<int>(std::floor(H / dx + 1e-9));
  const int n = hi - lo + 1;
  std::vector<double> x2(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) x2[static_cast<std::size_t>(j)] = (lo + j) * dx;
  struct Part {
    double total = 0;
    std::vector<double> integral, vol;
    bool uncovered = false;
  };
  std::vector<Part> part(static_cast<std::size_t>(n));
  detail::parallel_for(n, jobs, [&](int l, int) {
    Part& pt = part[static_cast<std::size_t>(l)];
    pt.integral.assign(cubes.size(), 0.0);
    pt.vol.assign(cubes.size(), 0.0);
    const double x3 = (lo + l) * dx;
    std::vector<std::vector<cplx>> a, b;
    e1.eval(x3, lo, hi, x2, a);
    e2.eval(x3, lo, hi, x2, b);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::size_t q = static_cast<std::size_t>(j) * n + i;
        const double v = std::norm(a[0][q]) * std::norm(b[0][q]) * dv;
        pt.total += v;
        const Vec3 x{(lo + i) * dx, x2[static_cast<std::size_t>(j)], x3};
        const auto it = index.find({static_cast<long long>(std::floor(x[0] / side)),
                                    static_cast<long long>(std::floor(x[1] / side)),
                                    static_cast<long long>(std::floor(x[2] / side))});
        const bool wall = axis_dist(x, p1.anchor, p1.dir) <= inst.f1.tube_radius &&
                          axis_dist(x, p2.anchor, p2.dir) <= inst.f2.tube_radius;
        if (it == index.end()) {
          pt.uncovered |= wall;
          continue;
        }
        pt.integral[static_cast<std::size_t>(it->second)] += v;
        if (wall) pt.vol[static_cast<std::size_t>(it->second)] += dv;
      }
  });
  BilinearRow row;
  row.R = inst.R;
  row.angle = inst.angle;
  row.f1sq = inst.f1.l2 * inst.f1.l2;
  row.f2sq = inst.f2.l2 * inst.f2.l2;
  row.cubes.resize(cubes.size());
  for (std::size_t c = 0; c < cubes.size(); ++c) row.cubes[c].q = cubes[c];
  for (const auto& pt : part) {
    if (pt.uncovered) usage_error("cubes do not cover the wall");
    row.integral += pt.total;
    for (std::size_t c = 0; c < cubes.size(); ++c) {
      row.cubes[c].integral += pt.integral[c];
      row.cubes[c].majorant += pt.vol[c];
    }
  }
  row.normalized = row.integral / (row.f1sq * row.f2sq);
  const double m = row.f1sq * row.f2sq / (inst.R * inst.R);
  double si = 0, sm = 0;
  for (auto& c : row.cubes) {
    c.majorant *= m;
    if (c.majorant > 0) {
      c.ratio = c.integral / c.majorant;
      row.cube_ratio_max = std::max(row.cube_ratio_max, c.ratio);
    }
    si += c.integral;
    sm += c.majorant;
  }
  row.aggregate_ratio = sm > 0 ? si / sm : 0.0;
  row.l2_ratio = l2_ball_ratio(S, inst.f1, jobs);
  return row;
}

double l2_ball_ratio(const SurfaceSpec& S, const ExampleField& ex, int jobs) {
  EvalRegion ball;
  ball.R = ex.R;
  const double R = ex.R;
  ball.x2_range = [R](double) { return std::make_pair(-R, R); };
  ball.contains = [](const Vec3&) { return true; };
  ExampleField one = ex;
  one.num_labels = 1;
  for (auto& l : one.label) l = l >= 0 ? 0 : -1;
  const RegionStats st = region_stats(S, one, ball, 1.0, {}, jobs);
  return st.l2sq / (R * ex.l2 * ex.l2);
}

nlohmann::json BilinearReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json cubes = nlohmann::json::array();
    for (const auto& c : r.cubes)
      cubes.push_back({{"lo", c.q.lo}, {"side", c.q.side}, {"integral", c.integral}, {"majorant", c.majorant},
                       {"ratio", c.ratio}});
    j["rows"].push_back({{"R", r.R},
                         {"integral", r.integral},
                         {"f1_l2sq", r.f1sq},
                         {"f2_l2sq", r.f2sq},
                         {"normalized", r.normalized},
                         {"l2_ratio", r.l2_ratio},
                         {"angle", r.angle},
                         {"cube_ratio_max", r.cube_ratio_max},
                         {"aggregate_ratio", r.aggregate_ratio},
                         {"cubes", cubes}});
  }
  j["fit"] = fit.to_json();
  j["l2_ratio_max"] = l2_ratio_max;
  j["csv"] = csv();
  return j;
}

std::string BilinearReport::csv() const {
  std::ostringstream o;
  o << "R,integral,f1_l2sq,f2_l2sq,normalized,l2_ratio,angle,cubes,cube_ratio_max,aggregate_ratio\n";
  for (const auto& r : rows)
    o << fmt(r.R) << ',' << fmt(r.integral) << ',' << fmt(r.f1sq) << ',' << fmt(r.f2sq) << ',' << fmt(r.normalized)
      << ',' << fmt(r.l2_ratio) << ',' << fmt(r.angle) << ',' << r.cubes.size() << ',' << fmt(r.cube_ratio_max)
      << ',' << fmt(r.aggregate_ratio) << '\n';
  o << "fit,slope,intercept,max_residual\nnormalized," << fmt(fit.slope) << ',' << fmt(fit.intercept) << ','
    << fmt(fit.max_residual) << '\n';
  return o.str();
}

BilinearReport bilinear_sweep(const SurfaceSpec& S, const std::vector<double>& R_list, double separation,
                              std::uint64_t seed, int jobs) {
  if (R_list.size() < 2) usage_error("bilinear sweep needs at least two R values");
  BilinearReport rep;
  std::vector<double> Rs, v;
  for (double R : R_list) {
    const BilinearInstance inst = two_packet_instance(S, R, separation, seed);
    rep.rows.push_back(bilinear_l4_check(S, inst, wall_cubes(inst), jobs));
    Rs.push_back(R);
    v.push_back(rep.rows.back().normalized);
    rep.l2_ratio_max = std::max(rep.l2_ratio_max, rep.rows.back().l2_ratio);
  }
  rep.fit = fit_loglog(Rs, v);
  return rep;
}

double packet_decay_ratio(const SurfaceSpec& S, double R, const WavePacketOptions& opt, double distance) {
  const double dw = wave_packet_dw(R, opt, 0.5);
  const FreqField f = FreqField::sample(
      [](double a, double b) { return cplx(a * a + b * b < 0.25 ? 1.0 : 0.0); }, dw, -0.5, 0.5, -0.5, 0.5);
  WavePacketSet wp(S, f, R, opt);
  int cap = -1;
  for (std::size_t c = 0; c < wp.caps().size(); ++c)
    if (wp.caps()[c].a == 2 && wp.caps()[c].b == 1) cap = static_cast<int>(c);
  if (cap < 0) throw Error(ErrorCode::internal, "reference cap missing");
  const FreqField fT = wp.packet(cap, {0, 0});
  const Vec3 v = wp.direction(cap);
  const Vec3 e1 = normalized(cross(v, Vec3{1, 0, 0})), e2 = cross(v, e1);
  const double d = distance * wp.tube_radius();
  const double peak = std::abs(extension_direct(S, fT, {0, 0, 0}));
  double m = 0;
  for (double t : {0.0, 0.5, 0.9})
    for (int q = 0; q < 24; ++q) {
      const double ph = 2 * kPi * q / 24;
      const Vec3 x = (t * R) * v + (d * std::cos(ph)) * e1 + (d * std::sin(ph)) * e2;
      m = std::max(m, std::abs(extension_direct(S, fT, x)));
    }
  return m / peak;
}

}  // namespace polylab
