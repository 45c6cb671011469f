#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include "fft_util.hpp"
#include "parallel.hpp"
#include "polylab/restriction.hpp"

namespace polylab {

namespace {

constexpr double kPi = std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

}  // namespace

struct WavePacketSet::Impl {
  int Mc = 0;  // kernel half-width in lattice steps
  int L = 0;   // FFT side
  int M = 0;   // tube lattice size per period
  std::vector<cplx> c0;      // (2 Mc + 1)^2, index (m1 + Mc) * (2 Mc + 1) + m2 + Mc
  std::vector<cplx> c0_fft;  // L * L
  std::vector<cplx> roots;   // e^{-2 pi i t / M}
  fftw_plan fwd = nullptr, bwd = nullptr;

  void fft(fftw_plan p, std::vector<cplx>& a) const {
    auto* d = reinterpret_cast<fftw_complex*>(a.data());
    fftw_execute_dft(p, d, d);
  }
  std::vector<cplx> kernel_fft(const std::vector<cplx>& k) const {
    std::vector<cplx> a(static_cast<std::size_t>(L) * L, cplx(0));
    const int w = 2 * Mc + 1;
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) a[static_cast<std::size_t>(i) * L + j] = k[static_cast<std::size_t>(i) * w + j];
    fft(fwd, a);
    return a;
  }
};

WavePacketSet::WavePacketSet(const SurfaceSpec& S, const FreqField& f, double R, const WavePacketOptions& opt)
    : S_(S), f_(f), R_(R), opt_(opt) {
  if (!(R >= 64)) usage_error("wave packets need R >= 64");
  if (!(opt.delta > 0 && opt.delta < 0.25)) usage_error("delta must lie in (0, 0.25)");
  if (!(opt.overlap > 0 && opt.overlap <= 0.5)) usage_error("cap overlap must lie in (0, 0.5]");
  if (!(opt.theta_radius * 2 >= (0.5 + opt.overlap) * kSqrt2 - 1e-12))
    usage_error("theta radius too small: the partition support must lie in 2 theta");
  if (!(opt.footprint > 0 && opt.footprint <= 1) || !(opt.lattice > 0 && opt.lattice <= 1))
    usage_error("footprint and lattice factors must lie in (0, 1]");
  dw_ = f.dw;
  P_ = 2 * kPi / dw_;
  rho_ = std::pow(R, 0.5 + opt.delta);
  s_ = 1.0 / std::sqrt(R);
  const double g = support_gradient(S, f);
  const double need = 2 * (R * (1 + g) + 2 * rho_);
  if (P_ < need * (1 - 1e-12)) {
    std::ostringstream os;
    os << "frequency spacing " << dw_ << " is too coarse for wave packets at R = " << R << "; required spacing <= "
       << 2 * kPi / need;
    usage_error(os.str());
  }
  const double rb = opt.footprint * rho_;
  auto impl = std::make_unique<Impl>();
  impl->M = static_cast<int>(std::ceil(P_ / (opt.lattice * rb)));
  sT_ = P_ / impl->M;
  impl->Mc = static_cast<int>(std::ceil((3 * opt.theta_radius + 0.5 + opt.overlap) * s_ / dw_)) + 1;
  const int nin = static_cast<int>(std::floor(2 * (0.5 + opt.overlap) * s_ / dw_)) + 2;
  impl->L = detail::nice_size(nin + 2 * impl->Mc + 1);
  const double bytes = 16.0 * (3.0 * static_cast<double>(f.size()) + 8.0 * impl->L * impl->L);
  if (bytes > opt.memory_budget) {
    std::ostringstream os;
    os << "wave packet grids need about " << bytes / 1e6 << " MB, over the budget of " << opt.memory_budget / 1e6
       << " MB; use a smaller R";
    usage_error(os.str());
  }

  // Fourier coefficients over the period of phi0 = b(|y| / rb) / sum over the lattice.
  const int nq = opt.quadrature, Mc = impl->Mc, w = 2 * Mc + 1;
  std::vector<double> yq(nq);
  for (int q = 0; q < nq; ++q) yq[q] = ((q + 0.5) / nq * 2 - 1) * rb;
  const int Lk = static_cast<int>(std::ceil(2 * rb / sT_)) + 1;
  std::vector<double> phi(static_cast<std::size_t>(nq) * nq);
  for (int p = 0; p < nq; ++p)
    for (int q = 0; q < nq; ++q) {
      const double y1 = yq[p], y2 = yq[q];
      double den = 0;
      for (int a = -Lk; a <= Lk; ++a)
        for (int b = -Lk; b <= Lk; ++b) den += bump(std::hypot(y1 - a * sT_, y2 - b * sT_) / rb);
      const double num = bump(std::hypot(y1, y2) / rb);
      phi[static_cast<std::size_t>(p) * nq + q] = num > 0 ? num / den : 0.0;
    }
  std::vector<cplx> E(static_cast<std::size_t>(w) * nq);
  for (int m = 0; m < w; ++m)
    for (int q = 0; q < nq; ++q) E[static_cast<std::size_t>(m) * nq + q] = std::polar(1.0, -(m - Mc) * dw_ * yq[q]);
  std::vector<cplx> T(static_cast<std::size_t>(w) * nq, cplx(0));  // T[m1][q] = sum_p E[m1][p] phi[p][q]
  for (int m = 0; m < w; ++m)
    for (int p = 0; p < nq; ++p) {
      const cplx e = E[static_cast<std::size_t>(m) * nq + p];
      for (int q = 0; q < nq; ++q) T[static_cast<std::size_t>(m) * nq + q] += e * phi[static_cast<std::size_t>(p) * nq + q];
    }
  const double hq = 2 * rb / nq;
  impl->c0.assign(static_cast<std::size_t>(w) * w, cplx(0));
  for (int m1 = 0; m1 < w; ++m1)
    for (int m2 = 0; m2 < w; ++m2) {
      cplx s = 0;
      for (int q = 0; q < nq; ++q) s += T[static_cast<std::size_t>(m1) * nq + q] * E[static_cast<std::size_t>(m2) * nq + q];
      impl->c0[static_cast<std::size_t>(m1) * w + m2] = s * (hq * hq / (P_ * P_));
    }
  impl->roots.resize(impl->M);
  for (int t = 0; t < impl->M; ++t) impl->roots[t] = std::polar(1.0, -2 * kPi * t / impl->M);
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    fftw_complex* tmp = fftw_alloc_complex(static_cast<std::size_t>(impl->L) * impl->L);
    impl->fwd = fftw_plan_dft_2d(impl->L, impl->L, tmp, tmp, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    impl->bwd = fftw_plan_dft_2d(impl->L, impl->L, tmp, tmp, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(tmp);
  }
  impl->c0_fft = impl->kernel_fft(impl->c0);
  impl_ = impl.release();

  // Caps whose partition function meets the support of f.
  std::map<std::pair<int, int>, int> seen;
  const double reach = 0.5 + opt.overlap;
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j) {
      if (f.at(i, j) == cplx(0)) continue;
      const double u1 = f.w1(i) / s_, u2 = f.w2(j) / s_;
      const int a0 = static_cast<int>(std::floor(u1)), b0 = static_cast<int>(std::floor(u2));
      for (int a = a0 - 1; a <= a0 + 1; ++a)
        for (int b = b0 - 1; b <= b0 + 1; ++b)
          if (std::abs(u1 - (a + 0.5)) < reach && std::abs(u2 - (b + 0.5)) < reach) seen[{a, b}] = 1;
    }
  for (const auto& [ab, unused] : seen) {
    (void)unused;
    ThetaCap c;
    c.a = ab.first;
    c.b = ab.second;
    c.center = {(c.a + 0.5) * s_, (c.b + 0.5) * s_};
    caps_.push_back(c);
  }
}

WavePacketSet::~WavePacketSet() {
  if (!impl_) return;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_mutex());
    if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
    if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
  }
  delete impl_;
}

Vec3 WavePacketSet::direction(int cap) const {
  const Vec2& c = caps_.at(cap).center;
  return S_.normal(c[0], c[1]);
}

double WavePacketSet::axis_distance(int cap, const Vec2& c, const Vec3& x) const {
  const Vec3 v = direction(cap);
  const Vec3 d = x - Vec3{c[0], c[1], 0.0};
  return norm(d - dot(d, v) * v);
}

std::vector<Vec2> WavePacketSet::tubes(int cap) const {
  const int M = impl_->M;
  std::vector<Vec2> out;
  const Vec3 origin{0, 0, 0};
  for (int a = -(M / 2); a < M - M / 2; ++a)
    for (int b = -(M / 2); b < M - M / 2; ++b) {
      const Vec2 c{a * sT_, b * sT_};
      if (axis_distance(cap, c, origin) <= R_ + rho_) out.push_back(c);
    }
  return out;
}

double WavePacketSet::chi(int cap, double w1, double w2) const {
  const ThetaCap& c = caps_[cap];
  const double b = opt_.overlap;
  const double t1 = std::abs(w1 / s_ - (c.a + 0.5)), t2 = std::abs(w2 / s_ - (c.b + 0.5));
  return smooth_step((0.5 + b - t1) / (2 * b)) * smooth_step((0.5 + b - t2) / (2 * b));
}

double WavePacketSet::psi(int cap, double w1, double w2) const {
  const Vec2& c = caps_.at(cap).center;
  const double rr = std::hypot(w1 - c[0], w2 - c[1]) / (opt_.theta_radius * s_);
  return smooth_step(3 - rr);
}

FreqField WavePacketSet::cap_part(int cap) const {
  const Vec2& c = caps_.at(cap).center;
  const double half = (0.5 + opt_.overlap) * s_;
  const int ka1 = std::max(f_.k1, static_cast<int>(std::ceil((c[0] - half) / dw_)));
  const int kb1 = std::min(f_.k1 + f_.n1 - 1, static_cast<int>(std::floor((c[0] + half) / dw_)));
  const int ka2 = std::max(f_.k2, static_cast<int>(std::ceil((c[1] - half) / dw_)));
  const int kb2 = std::min(f_.k2 + f_.n2 - 1, static_cast<int>(std::floor((c[1] + half) / dw_)));
  if (kb1 < ka1 || kb2 < ka2) return FreqField::zeros(dw_, ka1, ka2, 1, 1);
  FreqField out = FreqField::zeros(dw_, ka1, ka2, kb1 - ka1 + 1, kb2 - ka2 + 1);
  for (int i = 0; i < out.n1; ++i)
    for (int j = 0; j < out.n2; ++j) {
      const cplx v = f_.at(ka1 + i - f_.k1, ka2 + j - f_.k2);
      if (v != cplx(0)) out.at(i, j) = v * chi(cap, out.w1(i), out.w2(j));
    }
  return out;
}

double WavePacketSet::cap_energy(int cap) const {
  const double n = l2_norm(S_, cap_part(cap));
  return n * n;
}

FreqField WavePacketSet::convolve(int cap, const std::vector<cplx>& kernel_fft, const Vec2* shift) const {
  const Impl& I = *impl_;
  const FreqField in = cap_part(cap);
  const int L = I.L, Mc = I.Mc;
  if (in.n1 + 2 * Mc + 1 > L + 1 || in.n2 + 2 * Mc + 1 > L + 1) throw Error(ErrorCode::internal, "cap window exceeds FFT size");
  std::vector<cplx> a(static_cast<std::size_t>(L) * L, cplx(0));
  for (int i = 0; i < in.n1; ++i)
    for (int j = 0; j < in.n2; ++j) {
      cplx v = in.at(i, j);
      if (v == cplx(0)) continue;
      const double w1 = in.w1(i), w2 = in.w2(j);
      v *= S_.jacobian(w1, w2);
      if (shift) v *= std::polar(1.0, w1 * (*shift)[0] + w2 * (*shift)[1]);
      a[static_cast<std::size_t>(i) * L + j] = v;
    }
  I.fft(I.fwd, a);
  for (std::size_t q = 0; q < a.size(); ++q) a[q] *= kernel_fft[q];
  I.fft(I.bwd, a);
  const double norm_fft = 1.0 / (static_cast<double>(L) * L);
  const Vec2& c = caps_[cap].center;
  const double hw = 3 * opt_.theta_radius * s_;
  const int oa1 = static_cast<int>(std::ceil((c[0] - hw) / dw_)), ob1 = static_cast<int>(std::floor((c[0] + hw) / dw_));
  const int oa2 = static_cast<int>(std::ceil((c[1] - hw) / dw_)), ob2 = static_cast<int>(std::floor((c[1] + hw) / dw_));
  FreqField out = FreqField::zeros(dw_, oa1, oa2, ob1 - oa1 + 1, ob2 - oa2 + 1);
  for (int i = 0; i < out.n1; ++i)
    for (int j = 0; j < out.n2; ++j) {
      const int q1 = oa1 + i - in.k1 + Mc, q2 = oa2 + j - in.k2 + Mc;
      if (q1 < 0 || q2 < 0 || q1 >= L || q2 >= L) continue;
      const double w1 = out.w1(i), w2 = out.w2(j);
      const double ps = psi(cap, w1, w2);
      if (ps == 0) continue;
      cplx v = a[static_cast<std::size_t>(q1) * L + q2] * (norm_fft * ps);
      if (shift) v *= std::polar(1.0, -(w1 * (*shift)[0] + w2 * (*shift)[1]));
      out.at(i, j) = v;
    }
  return out;
}

FreqField WavePacketSet::packet(int cap, const Vec2& c) const {
  FreqField F = convolve(cap, impl_->c0_fft, &c);
  for (int i = 0; i < F.n1; ++i)
    for (int j = 0; j < F.n2; ++j)
      if (F.at(i, j) != cplx(0)) F.at(i, j) /= S_.jacobian(F.w1(i), F.w2(j));
  return F;
}

FreqField WavePacketSet::reconstruction(int jobs) const {
  const Impl& I = *impl_;
  const int margin = static_cast<int>(std::ceil(3 * opt_.theta_radius * s_ / dw_)) + 2;
  FreqField out = FreqField::zeros(dw_, f_.k1 - margin, f_.k2 - margin, f_.n1 + 2 * margin, f_.n2 + 2 * margin);
  const int Mc = I.Mc, w = 2 * Mc + 1, M = I.M;
  auto cap_sum = [&](int cap) {
    // A_m = c0_m * sum over T(theta) of e^{-i omega_m . c_T}, grouped by lattice row.
    std::map<int, std::vector<int>> rows;
    for (const Vec2& c : tubes(cap)) rows[static_cast<int>(std::lround(c[0] / sT_))].push_back(static_cast<int>(std::lround(c[1] / sT_)));
    std::vector<cplx> A(static_cast<std::size_t>(w) * w, cplx(0)), inner(w);
    auto root = [&](long long t) { return I.roots[static_cast<std::size_t>(((t % M) + M) % M)]; };
    for (const auto& [a, bs] : rows) {
      for (int m2 = -Mc; m2 <= Mc; ++m2) {
        cplx s = 0;
        for (int b : bs) s += root(static_cast<long long>(m2) * b);
        inner[m2 + Mc] = s;
      }
      for (int m1 = -Mc; m1 <= Mc; ++m1) {
        const cplx e = root(static_cast<long long>(m1) * a);
        for (int m2 = 0; m2 < w; ++m2) A[static_cast<std::size_t>(m1 + Mc) * w + m2] += e * inner[m2];
      }
    }
    for (std::size_t q = 0; q < A.size(); ++q) A[q] *= I.c0[q];
    FreqField F = convolve(cap, I.kernel_fft(A), nullptr);
    for (int i = 0; i < F.n1; ++i)
      for (int j = 0; j < F.n2; ++j)
        if (F.at(i, j) != cplx(0)) F.at(i, j) /= S_.jacobian(F.w1(i), F.w2(j));
    return F;
  };
  const int n = static_cast<int>(caps_.size());
  const int chunk = 64;
  for (int lo = 0; lo < n; lo += chunk) {
    const int hi = std::min(n, lo + chunk);
    std::vector<FreqField> parts(hi - lo);
    detail::parallel_for(hi - lo, jobs, [&](int k, int) { parts[k] = cap_sum(lo + k); });
    for (const auto& p : parts) out.add(p);
  }
  return out;
}

// ---- property checks ----

nlohmann::json PropertyReport::to_json() const {
  return {{"R", R},
          {"delta", delta},
          {"support_ok", support_ok},
          {"support_leak", support_leak},
          {"decay_max", decay_max},
          {"decay_relative", decay_relative},
          {"reconstruction_error", reconstruction_error},
          {"orthogonality_max", orthogonality_max},
          {"budget_max", budget_max},
          {"caps", caps},
          {"packets_checked", packets_checked}};
}

PropertyReport check_wave_packets(const WavePacketSet& wp, const PropertyOptions& opt) {
  PropertyReport rep;
  const SurfaceSpec& S = wp.surface();
  const double R = wp.R(), rho = wp.tube_radius();
  rep.R = R;
  rep.delta = wp.delta();
  rep.caps = static_cast<int>(wp.caps().size());
  Rng rng = make_rng(opt.seed, 0x3a7e);
  const double fnorm = l2_norm(S, wp.field());
  const int ncap = rep.caps;

  std::vector<double> energy(ncap);
  for (int c = 0; c < ncap; ++c) energy[c] = wp.cap_energy(c);
  const double emax = ncap ? *std::max_element(energy.begin(), energy.end()) : 0.0;
  std::vector<int> by_energy(ncap);
  for (int c = 0; c < ncap; ++c) by_energy[c] = c;
  std::stable_sort(by_energy.begin(), by_energy.end(), [&](int a, int b) { return energy[a] > energy[b]; });

  auto check_support = [&](int cap, const FreqField& F) {
    const Vec2& c = wp.caps()[cap].center;
    const double lim = 3 * wp.options().theta_radius * wp.cap_side();
    for (int i = 0; i < F.n1; ++i)
      for (int j = 0; j < F.n2; ++j)
        if (F.at(i, j) != cplx(0) && std::hypot(F.w1(i) - c[0], F.w2(j) - c[1]) > lim * (1 + 1e-9)) {
          rep.support_ok = false;
          rep.support_leak = std::max(rep.support_leak, std::abs(F.at(i, j)));
        }
  };

  // Property 2: decay off the central tube of a few caps.
  std::vector<int> strong;
  for (int c = 0; c < ncap; ++c)
    if (energy[c] >= 1e-2 * emax) strong.push_back(c);
  std::shuffle(strong.begin(), strong.end(), rng);
  const int nd = std::min<int>(opt.decay_packets, static_cast<int>(strong.size()));
  for (int k = 0; k < nd; ++k) {
    const int cap = strong[k];
    const Vec3 v = wp.direction(cap);
    Vec2 best{0, 0};
    double bd = 1e300;
    for (const Vec2& c : wp.tubes(cap)) {
      const double d = wp.axis_distance(cap, c, {0, 0, 0});
      if (d < bd) {
        bd = d;
        best = c;
      }
    }
    const FreqField fT = wp.packet(cap, best);
    check_support(cap, fT);
    ++rep.packets_checked;
    const Vec3 base{best[0], best[1], 0.0};
    const Vec3 x0 = base - dot(base, v) * v;  // axis point nearest the origin
    const Vec3 e1 = normalized(cross(v, std::abs(v[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
    const Vec3 e2 = cross(v, e1);
    const double tmax = std::sqrt(std::max(0.0, R * R - dot(x0, x0)));
    double peak = 0;
    for (int q = 0; q <= 8; ++q) {
      const Vec3 x = x0 + ((q / 4.0 - 1) * 0.9 * tmax) * v;
      peak = std::max(peak, std::abs(extension_direct(S, fT, x)));
    }
    double ring = 0, off = 0;
    for (int q = 0; q < opt.decay_points; ++q) {
      const double phi = uniform(rng, 0, 2 * std::numbers::pi);
      const Vec3 dir = std::cos(phi) * e1 + std::sin(phi) * e2;
      for (int kind = 0; kind < 2; ++kind) {
        const double d = kind == 0 ? 2 * rho : 2 * rho * (1 + uniform(rng));
        const Vec3 x = x0 + uniform(rng, -tmax, tmax) * v + d * dir;
        if (dot(x, x) > R * R) continue;
        const double a = std::abs(extension_direct(S, fT, x));
        if (kind == 0) ring = std::max(ring, a);
        off = std::max(off, a);
      }
      const Vec3 y = uniform(rng, 0, R) * random_unit(rng);
      if (wp.axis_distance(cap, best, y) >= 2 * rho) off = std::max(off, std::abs(extension_direct(S, fT, y)));
    }
    off = std::max(off, ring);
    if (fnorm > 0) rep.decay_max = std::max(rep.decay_max, off / fnorm);
    if (peak > 0) rep.decay_relative = std::max(rep.decay_relative, ring / peak);
  }

  // Property 3: reconstruction on the shrunken ball.
  {
    const FreqField rec = wp.reconstruction(opt.jobs);
    const double rs = R * (1 - std::pow(R, -wp.delta()));
    std::vector<Vec3> pts;
    while (static_cast<int>(pts.size()) < opt.points) {
      const Vec3 x{uniform(rng, -rs, rs), uniform(rng, -rs, rs), uniform(rng, -rs, rs)};
      if (dot(x, x) <= rs * rs) pts.push_back(x);
    }
    std::vector<double> num(pts.size()), den(pts.size());
    detail::parallel_for(static_cast<int>(pts.size()), opt.jobs, [&](int q, int) {
      const cplx e = extension_direct(S, wp.field(), pts[q]);
      const cplx r = extension_direct(S, rec, pts[q]);
      num[q] = std::norm(e - r);
      den[q] = std::norm(e);
    });
    double sn = 0, sd = 0;
    for (std::size_t q = 0; q < pts.size(); ++q) {
      sn += num[q];
      sd += den[q];
    }
    rep.reconstruction_error = sd > 0 ? std::sqrt(sn / sd) : 0.0;
  }

  // Properties 4 and 5 on the most energetic caps.
  const int nb = std::min(opt.budget_caps, ncap);
  for (int k = 0; k < nb; ++k) {
    const int cap = by_energy[k];
    const std::vector<Vec2> ts = wp.tubes(cap);
    std::vector<FreqField> packets(ts.size());
    detail::parallel_for(static_cast<int>(ts.size()), opt.jobs, [&](int t, int) { packets[t] = wp.packet(cap, ts[t]); });
    const double e = energy[cap];
    if (e <= 0) continue;
    double sum = 0;
    for (const auto& p : packets) {
      check_support(cap, p);
      const double n = l2_norm(S, p);
      sum += n * n;
    }
    rep.packets_checked += static_cast<int>(packets.size());
    rep.budget_max = std::max(rep.budget_max, sum / e);
    const Vec3 v = wp.direction(cap);
    for (std::size_t a = 0; a < ts.size(); ++a)
      for (std::size_t b = a + 1; b < ts.size(); ++b) {
        const Vec3 d{ts[a][0] - ts[b][0], ts[a][1] - ts[b][1], 0.0};
        if (norm(d - dot(d, v) * v) < 2 * rho) continue;  // tubes overlap
        rep.orthogonality_max = std::max(rep.orthogonality_max, std::abs(inner_product(S, packets[a], packets[b])) / e);
      }
  }
  return rep;
}

double wave_packet_dw(double R, const WavePacketOptions& opt, double wmax) {
  const double rho = std::pow(R, 0.5 + opt.delta);
  return 2 * kPi / (2 * (R * (1 + 2 * wmax) + 2 * rho));
}

FreqField random_test_function(const SurfaceSpec& S, double R, double dw, std::uint64_t seed, int bumps, double wmax) {
  (void)S;
  Rng rng = make_rng(seed, 0xf00d);
  struct B {
    Vec2 c;
    double r;
    Vec2 xi;
    cplx a;
  };
  std::vector<B> bs;
  for (int k = 0; k < bumps; ++k) {
    B b;
    b.r = uniform(rng, 0.15, 0.4);
    const double cr = (wmax - b.r) * std::sqrt(uniform(rng)), ca = uniform(rng, 0, 2 * kPi);
    b.c = {cr * std::cos(ca), cr * std::sin(ca)};
    const double xr = 0.5 * R * std::sqrt(uniform(rng)), xa = uniform(rng, 0, 2 * kPi);
    b.xi = {xr * std::cos(xa), xr * std::sin(xa)};
    const double ar = gaussian(rng), ai = gaussian(rng);
    b.a = cplx(ar, ai);
    bs.push_back(b);
  }
  return FreqField::sample(
      [&](double w1, double w2) {
        cplx s = 0;
        for (const B& b : bs) {
          const double t = std::hypot(w1 - b.c[0], w2 - b.c[1]) / b.r;
          if (t < 1) s += b.a * bump(t) * std::polar(1.0, -(b.xi[0] * w1 + b.xi[1] * w2));
        }
        return s;
      },
      dw, -wmax, wmax, -wmax, wmax);
}

}  // namespace polylab
