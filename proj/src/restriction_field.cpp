#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>

#include "fft_util.hpp"
#include "parallel.hpp"
#include "polylab/restriction.hpp"

namespace polylab {

namespace {

using detail::fftw_mutex;
using detail::nice_size;
constexpr double kPi = std::numbers::pi;

double ev(const Polynomial& p, double a, double b) {
  const double x[2] = {a, b};
  return p.eval(std::span<const double>(x, 2));
}

// Cumulative integral of bump(2t - 1) on [0, 1], normalized, with cubic
// Hermite interpolation between Simpson nodes.
struct StepTable {
  static constexpr int n = 8192;
  std::vector<double> c, d;
  StepTable() : c(n + 1), d(n + 1) {
    const double h = 1.0 / n;
    auto b = [](double t) { return bump(2 * t - 1); };
    c[0] = 0;
    for (int k = 0; k < n; ++k) c[k + 1] = c[k] + h / 6 * (b(k * h) + 4 * b((k + 0.5) * h) + b((k + 1) * h));
    const double tot = c[n];
    for (int k = 0; k <= n; ++k) {
      c[k] /= tot;
      d[k] = b(k * h) / tot;
    }
  }
  double lower(double t) const {
    const double u = t * n;
    const int k = std::min(static_cast<int>(u), n - 1);
    const double s = u - k, h = 1.0 / n;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * c[k] + (s3 - 2 * s2 + s) * h * d[k] + (-2 * s3 + 3 * s2) * c[k + 1] +
           (s3 - s2) * h * d[k + 1];
  }
};

const StepTable& step_table() {
  static const StepTable t;
  return t;
}

int pmod(long long a, int n) {
  long long r = a % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

void same_grid(const ComplexField& a, const ComplexField& b) {
  const XGrid &g = a.grid, &h = b.grid;
  if (g.dx != h.dx || g.i0 != h.i0 || g.j0 != h.j0 || g.l0 != h.l0 || g.n1 != h.n1 || g.n2 != h.n2 || g.n3 != h.n3 ||
      a.v.size() != b.v.size())
    usage_error("fields do not share one grid");
}

}  // namespace

double bump(double t) {
  const double a = std::abs(t);
  if (a >= 1) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - a * a));
}

double smooth_step(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  if (t == 0.5) return 0.5;
  const StepTable& tab = step_table();
  if (t > 0.5) return 1.0 - tab.lower(1.0 - t);
  return tab.lower(t);
}

// ---- SurfaceSpec ----

nlohmann::json SurfaceCheck::to_json() const {
  return {{"ok", ok},
          {"h0", h0},
          {"grad0", grad0},
          {"hessian_min", hessian_min},
          {"hessian_max", hessian_max},
          {"high_deriv_max", high_deriv_max},
          {"order", order},
          {"violation", violation}};
}

SurfaceSpec::SurfaceSpec(Polynomial h) : h_(std::move(h)) {
  if (h_.num_vars() != 2) usage_error("surface height must be a polynomial in 2 variables");
  h1_ = h_.derivative(0);
  h2_ = h_.derivative(1);
  h11_ = h1_.derivative(0);
  h12_ = h1_.derivative(1);
  h22_ = h2_.derivative(1);
}

SurfaceSpec SurfaceSpec::paraboloid() {
  TermMap t;
  t[{2, 0, 0}] = 1.0;
  t[{0, 2, 0}] = 1.0;
  return SurfaceSpec(Polynomial(2, t));
}

double SurfaceSpec::height(double w1, double w2) const { return ev(h_, w1, w2); }

Vec2 SurfaceSpec::grad(double w1, double w2) const { return {ev(h1_, w1, w2), ev(h2_, w1, w2)}; }

double SurfaceSpec::jacobian(double w1, double w2) const {
  const Vec2 g = grad(w1, w2);
  return std::sqrt(1 + g[0] * g[0] + g[1] * g[1]);
}

std::array<double, 3> SurfaceSpec::hessian(double w1, double w2) const {
  return {ev(h11_, w1, w2), ev(h12_, w1, w2), ev(h22_, w1, w2)};
}

Vec3 SurfaceSpec::normal(double w1, double w2) const {
  const Vec2 g = grad(w1, w2);
  return normalized(Vec3{-g[0], -g[1], 1.0});
}

SurfaceCheck SurfaceSpec::check(int order, double slack, int samples) const {
  SurfaceCheck r;
  r.order = order;
  r.h0 = std::abs(height(0, 0));
  const Vec2 g0 = grad(0, 0);
  r.grad0 = std::hypot(g0[0], g0[1]);
  std::vector<Polynomial> high;
  std::vector<Polynomial> level{h11_, h12_, h22_};
  for (int k = 3; k <= order; ++k) {
    std::vector<Polynomial> next;
    // d^k h / dw1^(k-m) dw2^m
    for (const auto& p : level) next.push_back(p.derivative(0));
    next.push_back(level.back().derivative(1));
    for (const auto& p : next) high.push_back(p);
    level = std::move(next);
  }
  r.hessian_min = std::numeric_limits<double>::infinity();
  r.hessian_max = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < samples; ++a)
    for (int b = 0; b < samples; ++b) {
      const double w1 = -1 + 2.0 * a / (samples - 1), w2 = -1 + 2.0 * b / (samples - 1);
      if (w1 * w1 + w2 * w2 > 1 + 1e-12) continue;
      const auto H = hessian(w1, w2);
      const double m = 0.5 * (H[0] + H[2]), d = std::sqrt(0.25 * (H[0] - H[2]) * (H[0] - H[2]) + H[1] * H[1]);
      r.hessian_min = std::min(r.hessian_min, m - d);
      r.hessian_max = std::max(r.hessian_max, m + d);
      for (const auto& p : high) r.high_deriv_max = std::max(r.high_deriv_max, std::abs(ev(p, w1, w2)));
    }
  std::ostringstream why;
  if (r.h0 > 1e-12) why << "h(0) = " << r.h0 << " != 0; ";
  if (r.grad0 > 1e-12) why << "|grad h(0)| = " << r.grad0 << " != 0; ";
  if (r.hessian_min < 0.5 - 1e-12) why << "Hessian eigenvalue " << r.hessian_min << " < 1/2; ";
  if (r.hessian_max > 2 + 1e-12) why << "Hessian eigenvalue " << r.hessian_max << " > 2; ";
  if (r.high_deriv_max > 1e-9 * (1 + slack))
    why << "derivative of order 3.." << order << " reaches " << r.high_deriv_max << " > " << 1e-9 * (1 + slack)
        << "; ";
  r.violation = why.str();
  if (!r.violation.empty()) r.violation.resize(r.violation.size() - 2);
  r.ok = r.violation.empty();
  return r;
}

nlohmann::json SurfaceSpec::to_json() const { return {{"h", h_.to_json()}}; }

SurfaceSpec SurfaceSpec::from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "paraboloid") return paraboloid();
    usage_error("unknown surface '" + j.get<std::string>() + "'");
  }
  if (!j.contains("h")) usage_error("surface needs an 'h' polynomial");
  return SurfaceSpec(Polynomial::from_json(j.at("h")));
}

// ---- FreqField ----

FreqField FreqField::zeros(double dw, int k1, int k2, int n1, int n2) {
  if (!(dw > 0) || n1 <= 0 || n2 <= 0) usage_error("empty frequency block");
  FreqField f;
  f.dw = dw;
  f.k1 = k1;
  f.k2 = k2;
  f.n1 = n1;
  f.n2 = n2;
  f.f.assign(static_cast<std::size_t>(n1) * n2, cplx(0));
  return f;
}

FreqField FreqField::covering(double dw, double w1lo, double w1hi, double w2lo, double w2hi) {
  const int k1 = static_cast<int>(std::floor(w1lo / dw)), k2 = static_cast<int>(std::floor(w2lo / dw));
  const int e1 = static_cast<int>(std::ceil(w1hi / dw)), e2 = static_cast<int>(std::ceil(w2hi / dw));
  return zeros(dw, k1, k2, e1 - k1 + 1, e2 - k2 + 1);
}

FreqField FreqField::sample(const std::function<cplx(double, double)>& fn, double dw, double w1lo, double w1hi,
                            double w2lo, double w2hi) {
  FreqField f = covering(dw, w1lo, w1hi, w2lo, w2hi);
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j) f.at(i, j) = fn(f.w1(i), f.w2(j));
  return f;
}

void FreqField::add(const FreqField& o, cplx scale) {
  if (std::abs(o.dw - dw) > 1e-12 * dw) usage_error("frequency lattices differ");
  const int di = o.k1 - k1, dj = o.k2 - k2;
  if (di < 0 || dj < 0 || di + o.n1 > n1 || dj + o.n2 > n2) usage_error("frequency block does not fit");
  for (int i = 0; i < o.n1; ++i)
    for (int j = 0; j < o.n2; ++j) at(i + di, j + dj) += scale * o.at(i, j);
}

FreqField FreqField::masked(const std::function<bool(int, int)>& keep) const {
  FreqField g = *this;
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j)
      if (!keep(i, j)) g.at(i, j) = 0;
  return g;
}

double l2_norm(const SurfaceSpec& S, const FreqField& f) {
  double s = 0;
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j) {
      const double a = std::norm(f.at(i, j));
      if (a > 0) s += a * S.jacobian(f.w1(i), f.w2(j));
    }
  return std::sqrt(s * f.dw * f.dw);
}

double linf_norm(const FreqField& f) {
  double m = 0;
  for (const auto& v : f.f) m = std::max(m, std::abs(v));
  return m;
}

cplx inner_product(const SurfaceSpec& S, const FreqField& a, const FreqField& b) {
  if (a.k1 != b.k1 || a.k2 != b.k2 || a.n1 != b.n1 || a.n2 != b.n2 || std::abs(a.dw - b.dw) > 1e-12 * a.dw)
    usage_error("inner product needs one lattice block");
  cplx s = 0;
  for (int i = 0; i < a.n1; ++i)
    for (int j = 0; j < a.n2; ++j) {
      const cplx& x = a.at(i, j);
      const cplx& y = b.at(i, j);
      if (x == cplx(0) || y == cplx(0)) continue;
      s += x * std::conj(y) * S.jacobian(a.w1(i), a.w2(j));
    }
  return s * a.dw * a.dw;
}

cplx extension_direct(const SurfaceSpec& S, const FreqField& f, const Vec3& x) {
  double sr = 0, si = 0;
  for (int i = 0; i < f.n1; ++i) {
    const double w1 = f.w1(i);
    for (int j = 0; j < f.n2; ++j) {
      const cplx& v = f.at(i, j);
      if (v == cplx(0)) continue;
      const double w2 = f.w2(j);
      const double ph = w1 * x[0] + w2 * x[1] + S.height(w1, w2) * x[2];
      const double J = S.jacobian(w1, w2);
      const double c = std::cos(ph), s = std::sin(ph);
      sr += J * (v.real() * c - v.imag() * s);
      si += J * (v.real() * s + v.imag() * c);
    }
  }
  return cplx(sr, si) * (f.dw * f.dw);
}

double support_gradient(const SurfaceSpec& S, const FreqField& f) {
  double g = 0;
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j)
      if (f.at(i, j) != cplx(0)) {
        const Vec2 d = S.grad(f.w1(i), f.w2(j));
        g = std::max(g, std::hypot(d[0], d[1]));
      }
  return g;
}

double required_dw(double R, double g) { return 2 * kPi / (2 * R * (1 + g)); }

void check_resolution(const SurfaceSpec& S, const FreqField& f, double R) {
  const double need = required_dw(R, support_gradient(S, f));
  if (f.dw > need * (1 + 1e-12)) {
    std::ostringstream os;
    os << "frequency spacing " << f.dw << " is too coarse for R = " << R << "; required spacing <= " << need;
    usage_error(os.str());
  }
}

// ---- SliceEvaluator ----

SliceEvaluator::SliceEvaluator(const SurfaceSpec& S, const FreqField& f, const std::vector<int>* labels, int nlabels,
                               double dx_max)
    : k1_(f.k1), n1_(f.n1), nlabels_(std::max(1, nlabels)), dw_(f.dw) {
  if (labels && labels->size() != f.size()) usage_error("label array does not match the frequency block");
  const double P = 2 * kPi / f.dw;
  N_ = nice_size(static_cast<int>(std::ceil(P / dx_max - 1e-9)));
  dx_ = P / N_;
  w2_.resize(f.n2);
  for (int j = 0; j < f.n2; ++j) w2_[j] = f.w2(j);
  const double w = f.dw * f.dw;
  for (int L = 0; L < nlabels_; ++L)
    for (int i = 0; i < f.n1; ++i) {
      int lo = -1, hi = -1;
      for (int j = 0; j < f.n2; ++j) {
        const std::size_t q = static_cast<std::size_t>(i) * f.n2 + j;
        const int lab = labels ? (*labels)[q] : 0;
        if (lab == L && f.f[q] != cplx(0)) {
          if (lo < 0) lo = j;
          hi = j;
        }
      }
      if (lo < 0) continue;
      Col c;
      c.label = L;
      c.i = i;
      c.jlo = lo;
      for (int j = lo; j <= hi; ++j) {
        const std::size_t q = static_cast<std::size_t>(i) * f.n2 + j;
        const int lab = labels ? (*labels)[q] : 0;
        const double w1 = f.w1(i), w2 = f.w2(j);
        const cplx F = lab == L ? f.f[q] * (S.jacobian(w1, w2) * w) : cplx(0);
        c.Fr.push_back(F.real());
        c.Fi.push_back(F.imag());
        c.h.push_back(S.height(w1, w2));
      }
      cols_.push_back(std::move(c));
    }
  std::lock_guard<std::mutex> lock(fftw_mutex());
  fftw_complex* tmp = fftw_alloc_complex(N_);
  plan_ = fftw_plan_dft_1d(N_, tmp, tmp, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(tmp);
  if (!plan_) throw Error(ErrorCode::internal, "FFTW plan creation failed");
}

SliceEvaluator::~SliceEvaluator() {
  std::lock_guard<std::mutex> lock(fftw_mutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void SliceEvaluator::eval(double x3, int i_lo, int i_hi, const std::vector<double>& x2,
                          std::vector<std::vector<cplx>>& out) const {
  const int ni = i_hi - i_lo + 1;
  const int nr = static_cast<int>(x2.size());
  const int n2 = static_cast<int>(w2_.size());
  if (ni <= 0 || ni > N_) usage_error("x1 window exceeds the transform period");
  std::vector<double> Er(static_cast<std::size_t>(nr) * n2), Ei(Er.size());
  for (int r = 0; r < nr; ++r)
    for (int j = 0; j < n2; ++j) {
      const double a = w2_[j] * x2[r];
      Er[static_cast<std::size_t>(r) * n2 + j] = std::cos(a);
      Ei[static_cast<std::size_t>(r) * n2 + j] = std::sin(a);
    }
  out.assign(nlabels_, std::vector<cplx>(static_cast<std::size_t>(nr) * ni, cplx(0)));
  std::vector<cplx> buf(static_cast<std::size_t>(nr) * N_);
  std::vector<double> gr, gi;
  auto plan = static_cast<fftw_plan>(plan_);
  std::size_t c = 0;
  for (int L = 0; L < nlabels_; ++L) {
    if (c >= cols_.size() || cols_[c].label != L) continue;
    std::fill(buf.begin(), buf.end(), cplx(0));
    for (; c < cols_.size() && cols_[c].label == L; ++c) {
      const Col& col = cols_[c];
      const int m = static_cast<int>(col.Fr.size());
      gr.resize(m);
      gi.resize(m);
      for (int j = 0; j < m; ++j) {
        const double a = col.h[j] * x3, cs = std::cos(a), sn = std::sin(a);
        gr[j] = col.Fr[j] * cs - col.Fi[j] * sn;
        gi[j] = col.Fr[j] * sn + col.Fi[j] * cs;
      }
      const int pos = pmod(static_cast<long long>(k1_) + col.i, N_);
      for (int r = 0; r < nr; ++r) {
        const double* er = &Er[static_cast<std::size_t>(r) * n2 + col.jlo];
        const double* ei = &Ei[static_cast<std::size_t>(r) * n2 + col.jlo];
        double sr = 0, si = 0;
        for (int j = 0; j < m; ++j) {
          sr += gr[j] * er[j] - gi[j] * ei[j];
          si += gr[j] * ei[j] + gi[j] * er[j];
        }
        buf[static_cast<std::size_t>(r) * N_ + pos] += cplx(sr, si);
      }
    }
    for (int r = 0; r < nr; ++r) {
      auto* row = reinterpret_cast<fftw_complex*>(&buf[static_cast<std::size_t>(r) * N_]);
      fftw_execute_dft(plan, row, row);
    }
    auto& o = out[L];
    for (int r = 0; r < nr; ++r)
      for (int i = 0; i < ni; ++i)
        o[static_cast<std::size_t>(r) * ni + i] = buf[static_cast<std::size_t>(r) * N_ + pmod(i_lo + i, N_)];
  }
}

// ---- fields ----

double ComplexField::lp_norm(double p, double ball) const {
  double s = 0;
  const double b2 = ball * ball;
  for (int l = 0; l < grid.n3; ++l)
    for (int j = 0; j < grid.n2; ++j)
      for (int i = 0; i < grid.n1; ++i) {
        if (ball > 0) {
          const Vec3 x = grid.point(i, j, l);
          if (dot(x, x) > b2) continue;
        }
        s += std::pow(std::abs(v[grid.index(i, j, l)]), p);
      }
  return std::pow(s * grid.dx * grid.dx * grid.dx, 1.0 / p);
}

std::vector<ComplexField> extension_fields(const SurfaceSpec& S, const FreqField& f, const std::vector<int>* labels,
                                           int nlabels, double R, const Vec3& lo, const Vec3& hi, int jobs) {
  check_resolution(S, f, R);
  SliceEvaluator se(S, f, labels, nlabels, 1.0);
  XGrid g;
  g.dx = se.dx();
  auto first = [&](double a) { return static_cast<int>(std::ceil(a / g.dx - 1e-9)); };
  auto last = [&](double a) { return static_cast<int>(std::floor(a / g.dx + 1e-9)); };
  g.i0 = first(lo[0]);
  g.j0 = first(lo[1]);
  g.l0 = first(lo[2]);
  g.n1 = last(hi[0]) - g.i0 + 1;
  g.n2 = last(hi[1]) - g.j0 + 1;
  g.n3 = last(hi[2]) - g.l0 + 1;
  if (g.n1 <= 0 || g.n2 <= 0 || g.n3 <= 0) usage_error("empty x region");
  std::vector<ComplexField> out(se.labels());
  for (auto& F : out) {
    F.grid = g;
    F.R = R;
    F.v.assign(g.size(), cplx(0));
  }
  std::vector<double> x2(g.n2);
  for (int j = 0; j < g.n2; ++j) x2[j] = (g.j0 + j) * g.dx;
  const std::size_t plane = static_cast<std::size_t>(g.n1) * g.n2;
  detail::parallel_for(g.n3, jobs, [&](int l, int) {
    std::vector<std::vector<cplx>> res;
    se.eval((g.l0 + l) * g.dx, g.i0, g.i0 + g.n1 - 1, x2, res);
    for (std::size_t L = 0; L < out.size(); ++L)
      std::copy(res[L].begin(), res[L].end(), out[L].v.begin() + static_cast<std::ptrdiff_t>(l * plane));
  });
  return out;
}

ComplexField extension_field(const SurfaceSpec& S, const FreqField& f, double R, const Vec3& lo, const Vec3& hi,
                             int jobs) {
  return std::move(extension_fields(S, f, nullptr, 1, R, lo, hi, jobs).front());
}

BroadResult broad_part(const ComplexField& ef, const std::vector<ComplexField>& taus, double alpha) {
  if (!(alpha > 0)) usage_error("alpha must be positive");
  for (const auto& t : taus) same_grid(ef, t);
  BroadResult r;
  const std::size_t n = ef.v.size();
  r.broad.assign(n, 0.0);
  r.narrow.assign(n, 0.0);
  r.points = static_cast<long long>(n);
  for (std::size_t q = 0; q < n; ++q) {
    const double a = std::abs(ef.v[q]);
    double mt = 0;
    for (const auto& t : taus) mt = std::max(mt, std::abs(t.v[q]));
    const bool b = is_broad(a, mt, alpha);
    r.broad[q] = b ? a : 0.0;
    r.narrow[q] = mt / alpha;
    r.broad_points += b;
    r.identity_violations += !broad_narrow_holds(a, r.broad[q], mt, alpha);
  }
  return r;
}

std::vector<double> bilinear_field(const std::vector<ComplexField>& taus, const std::vector<Vec2>& centers, double K) {
  if (taus.size() != centers.size()) usage_error("one centre per cap is required");
  if (taus.empty()) return {};
  for (const auto& t : taus) same_grid(taus.front(), t);
  std::vector<double> out(taus.front().v.size(), 0.0);
  for (std::size_t a = 0; a < taus.size(); ++a)
    for (std::size_t b = a + 1; b < taus.size(); ++b) {
      const double d = std::hypot(centers[a][0] - centers[b][0], centers[a][1] - centers[b][1]);
      if (d < 1.0 / K) continue;
      for (std::size_t q = 0; q < out.size(); ++q)
        out[q] += std::sqrt(std::abs(taus[a].v[q])) * std::sqrt(std::abs(taus[b].v[q]));
    }
  return out;
}

// ---- rescaling ----

Vec3 Rescaling::map(const Vec3& x) const {
  return {r * (x[0] + grad0[0] * x[2]), r * (x[1] + grad0[1] * x[2]), r * r * x[2]};
}

double Rescaling::weight(const SurfaceSpec& s0, const Vec2& eta) const {
  const Vec2 w = omega(eta);
  return r * r * s0.jacobian(w[0], w[1]) / s1.jacobian(eta[0], eta[1]);
}

Rescaling parabolic_rescale(const SurfaceSpec& s0, const Vec2& w0, double r) {
  if (!(r > 0) || std::hypot(w0[0], w0[1]) + r > 1 + 1e-12) usage_error("the cap B_r(w0) must lie in the unit disk");
  Rescaling rs;
  rs.w0 = w0;
  rs.r = r;
  rs.h0 = s0.height(w0[0], w0[1]);
  rs.grad0 = s0.grad(w0[0], w0[1]);
  Polynomial h = s0.h().compose_affine({r, 0, 0, r}, {w0[0], w0[1]}, 2);
  h -= Polynomial::constant(2, rs.h0);
  h -= (r * rs.grad0[0]) * Polynomial::variable(2, 0);
  h -= (r * rs.grad0[1]) * Polynomial::variable(2, 1);
  // drop cancellation residue from the constant and linear terms
  TermMap t;
  for (const auto& [e, c] : h.terms())
    if (e[0] + e[1] >= 2) t[e] = c / (r * r);
  rs.s1 = SurfaceSpec(Polynomial(2, t));
  rs.check = rs.s1.check();
  return rs;
}

FreqField rescale_function(const SurfaceSpec& s0, const Rescaling& rs, const std::function<cplx(double, double)>& f,
                           double deta) {
  return FreqField::sample(
      [&](double e1, double e2) -> cplx {
        if (e1 * e1 + e2 * e2 > 1) return 0;
        const Vec2 w = rs.omega({e1, e2});
        const cplx v = f(w[0], w[1]);
        if (v == cplx(0)) return 0;
        return v * rs.weight(s0, {e1, e2});
      },
      deta, -1, 1, -1, 1);
}

}  // namespace polylab
