// Extension operator fields over graph surfaces, wave packets, broad and
// bilinear functionals, parabolic rescaling and the sharp examples.
#pragma once

#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "polylab/polynomial.hpp"

namespace polylab {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;

// exp(1 - 1/(1 - t^2)) for |t| < 1, else 0.
double bump(double t);
// 0 for t <= 0, 1 for t >= 1, the normalized integral of the bump in between.
double smooth_step(double t);

struct SurfaceCheck {
  bool ok = true;
  double h0 = 0, grad0 = 0;
  double hessian_min = 0, hessian_max = 0;
  double high_deriv_max = 0;  // orders 3..order
  int order = 0;
  std::string violation;
  nlohmann::json to_json() const;
};

// Graph omega_3 = h(omega) over the unit disk.
class SurfaceSpec {
 public:
  explicit SurfaceSpec(Polynomial h);
  static SurfaceSpec paraboloid();

  const Polynomial& h() const { return h_; }
  double height(double w1, double w2) const;
  Vec2 grad(double w1, double w2) const;
  double jacobian(double w1, double w2) const;
  // (h_11, h_12, h_22)
  std::array<double, 3> hessian(double w1, double w2) const;
  // Normal direction (-grad h, 1), normalized.
  Vec3 normal(double w1, double w2) const;
  SurfaceCheck check(int order = 4, double slack = 0.0, int samples = 64) const;

  nlohmann::json to_json() const;
  static SurfaceSpec from_json(const nlohmann::json& j);

 private:
  Polynomial h_, h1_, h2_, h11_, h12_, h22_;
};

// Samples of a density on the surface (with respect to dvol) on the square
// lattice omega = (k1 + i, k2 + j) * dw.
struct FreqField {
  double dw = 0;
  int k1 = 0, k2 = 0;
  int n1 = 0, n2 = 0;
  std::vector<cplx> f;  // index i * n2 + j

  static FreqField zeros(double dw, int k1, int k2, int n1, int n2);
  // Smallest lattice block covering [w1lo, w1hi] x [w2lo, w2hi].
  static FreqField covering(double dw, double w1lo, double w1hi, double w2lo, double w2hi);
  static FreqField sample(const std::function<cplx(double, double)>& fn, double dw, double w1lo, double w1hi,
                          double w2lo, double w2hi);

  double w1(int i) const { return (k1 + i) * dw; }
  double w2(int j) const { return (k2 + j) * dw; }
  cplx& at(int i, int j) { return f[static_cast<std::size_t>(i) * n2 + j]; }
  const cplx& at(int i, int j) const { return f[static_cast<std::size_t>(i) * n2 + j]; }
  std::size_t size() const { return f.size(); }
  // Adds o, which must share dw and lie inside this block.
  void add(const FreqField& o, cplx scale = 1.0);
  // Same lattice block, values multiplied by mask(i, j).
  FreqField masked(const std::function<bool(int, int)>& keep) const;
};

double l2_norm(const SurfaceSpec& S, const FreqField& f);
double linf_norm(const FreqField& f);
// Integral of a * conj(b) dvol; both on one lattice block.
cplx inner_product(const SurfaceSpec& S, const FreqField& a, const FreqField& b);
// Riemann sum of e^{i(omega.x + h x_3)} f J over the lattice.
cplx extension_direct(const SurfaceSpec& S, const FreqField& f, const Vec3& x);
// Largest |grad h| over samples where f is nonzero.
double support_gradient(const SurfaceSpec& S, const FreqField& f);
// Coarsest dw for which the lattice period 2 pi / dw clears the field of
// radius R: 2 pi / (2 R (1 + g)), g = max |grad h| on the support.
double required_dw(double R, double g);
// Throws a usage error naming the required spacing.
void check_resolution(const SurfaceSpec& S, const FreqField& f, double R);

// Per-x3-slice evaluation of E f restricted to labelled parts of f.
// Labels in [0, nlabels) select the part; -1 drops the sample.
class SliceEvaluator {
 public:
  SliceEvaluator(const SurfaceSpec& S, const FreqField& f, const std::vector<int>* labels, int nlabels,
                 double dx_max = 1.0);
  ~SliceEvaluator();
  SliceEvaluator(const SliceEvaluator&) = delete;
  SliceEvaluator& operator=(const SliceEvaluator&) = delete;

  double dx() const { return dx_; }
  int fft_size() const { return N_; }
  int labels() const { return nlabels_; }
  // out[label][r * ni + i] = E f_label((i_lo + i) dx, x2[r], x3), ni = i_hi - i_lo + 1.
  void eval(double x3, int i_lo, int i_hi, const std::vector<double>& x2,
            std::vector<std::vector<cplx>>& out) const;

 private:
  struct Col {
    int label;
    int i;    // column in the block
    int jlo;  // first row; rows of other labels inside the run hold zeros
    std::vector<double> Fr, Fi;  // f J dw^2
    std::vector<double> h;
  };
  std::vector<Col> cols_;
  std::vector<double> w2_;
  int k1_ = 0, n1_ = 0;
  int nlabels_ = 1;
  int N_ = 0;
  double dx_ = 1, dw_ = 0;
  void* plan_ = nullptr;
};

struct XGrid {
  double dx = 1;
  int i0 = 0, j0 = 0, l0 = 0;
  int n1 = 0, n2 = 0, n3 = 0;
  Vec3 point(int i, int j, int l) const { return {(i0 + i) * dx, (j0 + j) * dx, (l0 + l) * dx}; }
  std::size_t size() const { return static_cast<std::size_t>(n1) * n2 * n3; }
  std::size_t index(int i, int j, int l) const {
    return (static_cast<std::size_t>(l) * n2 + j) * n1 + i;
  }
};

struct ComplexField {
  XGrid grid;
  double R = 0;
  std::vector<cplx> v;
  // (sum |v|^p dx^3)^(1/p) over grid points inside the ball of radius `ball` (all points if ball <= 0).
  double lp_norm(double p, double ball = 0) const;
};

// Grid over the box [lo, hi] with spacing <= 1 commensurate with the lattice.
std::vector<ComplexField> extension_fields(const SurfaceSpec& S, const FreqField& f, const std::vector<int>* labels,
                                           int nlabels, double R, const Vec3& lo, const Vec3& hi, int jobs = 1);
ComplexField extension_field(const SurfaceSpec& S, const FreqField& f, double R, const Vec3& lo, const Vec3& hi,
                             int jobs = 1);

// Pointwise broad part: |Ef| when max_tau |Ef_tau| <= alpha |Ef|, else 0.
inline bool is_broad(double abs_ef, double max_tau, double alpha) { return max_tau <= alpha * abs_ef; }
// |Ef| <= max(Br, max_tau / alpha), compared with both sides multiplied by alpha.
inline bool broad_narrow_holds(double abs_ef, double br, double max_tau, double alpha) {
  return abs_ef <= br || alpha * abs_ef <= max_tau;
}

struct BroadResult {
  std::vector<double> broad;   // Br_alpha Ef
  std::vector<double> narrow;  // max_tau |Ef_tau| / alpha
  long long points = 0;
  long long broad_points = 0;
  long long identity_violations = 0;
};
BroadResult broad_part(const ComplexField& ef, const std::vector<ComplexField>& taus, double alpha);

// Sum over unordered pairs with centre distance >= 1/K of |E_1|^(1/2) |E_2|^(1/2).
std::vector<double> bilinear_field(const std::vector<ComplexField>& taus, const std::vector<Vec2>& centers, double K);

// Rescaling of the cap B_r(w0): h1(eta) = r^-2 (h - first order Taylor at w0)(w0 + r eta).
struct Rescaling {
  SurfaceSpec s1 = SurfaceSpec::paraboloid();
  Vec2 w0{0, 0};
  double r = 1;
  double h0 = 0;
  Vec2 grad0{0, 0};
  SurfaceCheck check;

  Vec2 omega(const Vec2& eta) const { return {w0[0] + r * eta[0], w0[1] + r * eta[1]}; }
  // x_bar = (r (x + grad h(w0) x3), r^2 x3)
  Vec3 map(const Vec3& x) const;
  // g(eta) / f(omega(eta)) = r^2 J(omega) / J1(eta)
  double weight(const SurfaceSpec& s0, const Vec2& eta) const;
};
Rescaling parabolic_rescale(const SurfaceSpec& s0, const Vec2& w0, double r);
// Samples g on the eta lattice of spacing deta over the unit disk.
FreqField rescale_function(const SurfaceSpec& s0, const Rescaling& rs,
                           const std::function<cplx(double, double)>& f, double deta);

// ---- wave packets ----

struct WavePacketOptions {
  double delta = 0.2;
  double lattice = 1.0;     // tube lattice spacing in units of the footprint radius
  double footprint = 0.75;  // footprint radius of phi_T in units of the tube radius
  double overlap = 0.5;     // half-width of the cap partition transition, in cap sides
  double theta_radius = 1.0;  // radius of theta in units of R^-1/2
  int quadrature = 128;
  double memory_budget = 4e8;  // bytes
};

struct ThetaCap {
  int a = 0, b = 0;  // square [a s, (a+1) s) x [b s, (b+1) s)
  Vec2 center{0, 0};
};

// Wave packets f_T = psi_theta (phi_T^ * F_theta) / J on the lattice of f.
// Caps are squares of side s = R^-1/2 with a smooth product partition of unity
// chi_theta: 1 on the middle (1 - 2 overlap) s of each side, supported in the
// square of side (1 + 2 overlap) s. theta is the ball of radius s about the
// square's centre; psi_theta is 1 on 2 theta and vanishes off 3 theta. phi_T is a lattice partition of unity on the plane x3 = 0; the
// tube T runs from its footprint along v_theta.
class WavePacketSet {
 public:
  WavePacketSet(const SurfaceSpec& S, const FreqField& f, double R, const WavePacketOptions& opt = {});
  ~WavePacketSet();
  WavePacketSet(const WavePacketSet&) = delete;
  WavePacketSet& operator=(const WavePacketSet&) = delete;

  double R() const { return R_; }
  double delta() const { return opt_.delta; }
  double tube_radius() const { return rho_; }
  double cap_side() const { return s_; }
  double tube_spacing() const { return sT_; }
  double period() const { return P_; }
  const std::vector<ThetaCap>& caps() const { return caps_; }
  const FreqField& field() const { return f_; }
  const SurfaceSpec& surface() const { return S_; }
  const WavePacketOptions& options() const { return opt_; }

  Vec3 direction(int cap) const;
  // Tubes of T(theta): lattice centres (in x3 = 0) whose tube meets B_R.
  std::vector<Vec2> tubes(int cap) const;
  // Distance from x to the axis of the tube through (c, 0).
  double axis_distance(int cap, const Vec2& c, const Vec3& x) const;
  // f_theta = chi_theta f on its window.
  FreqField cap_part(int cap) const;
  double cap_energy(int cap) const;  // integral |f_theta|^2 dvol
  // f_T, supported in the 3 theta window.
  FreqField packet(int cap, const Vec2& c) const;
  // Sum over theta and T in T(theta) of f_T, on the lattice block of f (enlarged by the 3 theta margin).
  FreqField reconstruction(int jobs = 1) const;
  // psi_theta weight at omega.
  double psi(int cap, double w1, double w2) const;

 private:
  struct Impl;
  SurfaceSpec S_;
  FreqField f_;
  double R_, rho_, s_, sT_, P_, dw_;
  WavePacketOptions opt_;
  std::vector<ThetaCap> caps_;
  Impl* impl_ = nullptr;
  // psi_theta (K * F_theta) on the 3 theta window, K given by its transform;
  // with shift c the kernel is K_m e^{-i omega_m . c}.
  FreqField convolve(int cap, const std::vector<cplx>& kernel_fft, const Vec2* shift) const;
  double chi(int cap, double w1, double w2) const;
};

struct PropertyReport {
  double R = 0, delta = 0;
  bool support_ok = true;             // property 1
  double support_leak = 0;
  double decay_max = 0;               // property 2: max |E f_T| / ||f||_2 off the tube
  double decay_relative = 0;          // same, divided by max |E f_T| on the axis
  double reconstruction_error = 0;    // property 3: relative L2 on the shrunken ball
  double orthogonality_max = 0;       // property 4: |<f_T1, f_T2>| / int_theta |f|^2
  double budget_max = 0;              // property 5: sum_T ||f_T||^2 / int_theta |f|^2
  int caps = 0, packets_checked = 0;
  nlohmann::json to_json() const;
};

struct PropertyOptions {
  std::uint64_t seed = 1;
  int points = 200;        // reconstruction sample points
  int decay_packets = 4;
  int decay_points = 64;
  int budget_caps = 2;
  int jobs = 1;
};
PropertyReport check_wave_packets(const WavePacketSet& wp, const PropertyOptions& opt = {});

// Random smooth f: modulated bumps placing their packets inside B_{R/2}.
FreqField random_test_function(const SurfaceSpec& S, double R, double dw, std::uint64_t seed, int bumps = 8,
                               double wmax = 0.9);
// Lattice spacing used by the wave packet laboratory at scale R.
double wave_packet_dw(double R, const WavePacketOptions& opt = {}, double wmax = 0.9);

// ---- sharp examples ----

struct ExamplePacket {
  Vec2 cap{0, 0};
  double cap_radius = 0;
  Vec3 anchor{0, 0, 0};  // a point of the tube axis
  Vec3 dir{0, 0, 1};
  int sign = 1;
  int label = 0;
  int family = 0;
  double mismatch = 0;  // angle between the intended tube and dir
};

struct ExampleField {
  std::string kind;
  double R = 0;
  FreqField f;
  std::vector<int> label;  // tau of each sample, -1 off the support
  int num_labels = 0;
  std::vector<Vec2> label_centers;
  std::vector<ExamplePacket> packets;
  double tube_radius = 0;
  double l2 = 0, linf = 0;
  nlohmann::json meta;
  nlohmann::json summary() const;  // metadata without the sample arrays
};

// Tau index of omega on the grid of cells of side 2 / K over [-1, 1]^2.
int tau_cell(const Vec2& w, int K);
Vec2 tau_center(int cell, int K);

// Adds amp * bump(|omega - cap| / r) e^{-i anchor . (omega, h)} to f and tags
// the samples with the packet's label. The block of f must cover the cap.
void add_packet(const SurfaceSpec& S, ExampleField& ex, const ExamplePacket& pk, double amp);

struct PlanarOptions {
  double R = 64;
  int B = 4;
  int K = 16;
  std::uint64_t seed = 1;
  double amax = 0.8;   // caps along omega_2 = c with |omega_1| <= amax
  int force_cap = -1;  // keep only this cap (with B = 1: a single packet)
};
ExampleField build_planar_example(const SurfaceSpec& S, const PlanarOptions& opt);

struct RegulusOptions {
  double R = 64;
  int K = 4;
  std::uint64_t seed = 1;
  int families = 3;         // bit mask of the ruling families kept
  double patch = 0.75;      // rulings x = a, y = b with |a|, |b| <= patch R
  double spacing = 1.0;     // ruling spacing in units of R^1/2
  double cap_radius = 0.5;  // packet bump radius in units of R^-1/2
};
// Ruling directions are matched to cap normals by Newton on grad h = -(d1, d2) / d3,
// then snapped to the cap centre lattice ((a + 1/2) s, (b + 1/2) s), s = R^-1/2.
ExampleField build_regulus_example(const SurfaceSpec& S, const RegulusOptions& opt);

// Points of B_R in an x2 window per slice that pass `contains`.
struct EvalRegion {
  double R = 0;
  std::function<std::pair<double, double>(double)> x2_range;
  std::function<bool(const Vec3&)> contains;
};
// |n . x| <= half_width for the plane of the planar example.
EvalRegion slab_region(const ExampleField& ex, double half_width);
// Points within half_width (in the unrotated frame) of the regulus patch.
EvalRegion regulus_region(const ExampleField& ex, double half_width);

struct RegionStats {
  std::vector<double> p;
  std::vector<double> broad_pow;  // sum Br^p dx^3
  std::vector<double> all_pow;    // sum |Ef|^p dx^3
  double l2sq = 0;                // sum |Ef|^2 dx^3
  long long points = 0, broad_points = 0, identity_violations = 0;
  long long significant = 0, significant_broad = 0;  // points with |Ef| >= 0.3
  double dx = 1;
  double broad_norm(std::size_t k) const { return std::pow(broad_pow[k], 1.0 / p[k]); }
  double broad_fraction() const {
    return significant ? static_cast<double>(significant_broad) / static_cast<double>(significant) : 0.0;
  }
};
RegionStats region_stats(const SurfaceSpec& S, const ExampleField& ex, const EvalRegion& region, double alpha,
                         const std::vector<double>& ps, int jobs = 1);

// Fraction of grid points of the region lying in >= need packet tubes, or for
// need <= 0 in at least one tube of every family present.
double tube_overlap_fraction(const ExampleField& ex, const EvalRegion& region, double need, double dx = 1.0);

struct LineFit {
  double slope = 0, intercept = 0, max_residual = 0;
  nlohmann::json to_json() const;
};
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingOptions {
  std::string example = "planar";
  std::vector<double> R_list{64, 128, 256, 512};
  std::vector<double> p_list{3.25, 3.0};
  double alpha = 0.9;
  int K = 16;
  int B = 4;
  std::uint64_t seed = 1;
  int trials = 1;  // at the largest R; smaller R use trials * R_max / R
  int jobs = 1;
  nlohmann::json to_json() const;
};
struct ScalingRow {
  double R = 0;
  int trials = 0;
  std::vector<double> lhs;  // per p, geometric mean of ||Br Ef||_p
  double f_l2 = 0, f_linf = 0, rhs = 0;
  std::vector<double> ratio;
  double broad_fraction = 0;
  long long points = 0, identity_violations = 0;
};
struct ScalingReport {
  ScalingOptions opt;
  std::vector<ScalingRow> rows;
  std::vector<LineFit> lhs_fit, ratio_fit;
  LineFit rhs_fit, l2_fit, linf_fit;
  nlohmann::json to_json() const;
  std::string csv() const;
};
ScalingReport scaling_experiment(const SurfaceSpec& S, const ScalingOptions& opt);

// ---- bilinear ----

struct Cube {
  Vec3 lo{0, 0, 0};
  double side = 1;
};

struct BilinearInstance {
  double R = 0;
  ExampleField f1, f2;
  double angle = 0;     // between the two tube directions
  double box_half = 0;  // integration box [-box_half, box_half]^3 around the crossing
};
// Two single packets from caps `separation` apart, tubes crossing at the origin.
BilinearInstance two_packet_instance(const SurfaceSpec& S, double R, double separation, std::uint64_t seed);

struct CubeRow {
  Cube q;
  double integral = 0;  // int_Q |E f1|^2 |E f2|^2
  double majorant = 0;  // int_Q (R^-1 ||f1||^2 chi_T1)(R^-1 ||f2||^2 chi_T2)
  double ratio = 0;
};
struct BilinearRow {
  double R = 0;
  double integral = 0;  // over the box
  double f1sq = 0, f2sq = 0;
  double normalized = 0;  // integral / (||f1||^2 ||f2||^2)
  double l2_ratio = 0;    // ||E f1||^2_{L2(B_R)} / (R ||f1||^2)
  double angle = 0;
  double cube_ratio_max = 0, aggregate_ratio = 0;
  std::vector<CubeRow> cubes;
};
// Cubes of side R^1/2 on one lattice meeting T1 and T2 inside the box.
std::vector<Cube> wall_cubes(const BilinearInstance& inst);
// Throws a usage error when the cubes miss a wall point (a grid point in both tubes).
BilinearRow bilinear_l4_check(const SurfaceSpec& S, const BilinearInstance& inst, const std::vector<Cube>& cubes,
                              int jobs = 1);
// ||E f||^2 over B_R divided by R ||f||_2^2.
double l2_ball_ratio(const SurfaceSpec& S, const ExampleField& ex, int jobs = 1);

struct BilinearReport {
  std::vector<BilinearRow> rows;
  LineFit fit;
  double l2_ratio_max = 0;
  nlohmann::json to_json() const;
  std::string csv() const;
};
BilinearReport bilinear_sweep(const SurfaceSpec& S, const std::vector<double>& R_list, double separation,
                              std::uint64_t seed, int jobs = 1);

// Largest |E f_T| on the ring at `distance` tube radii from the axis, relative
// to |E f_T| at the crossing of the axis with x3 = 0; f is the constant 1 on
// the disk of radius 1/2 and T the tube through the origin of one cap.
double packet_decay_ratio(const SurfaceSpec& S, double R, const WavePacketOptions& opt, double distance = 2.0);

}  // namespace polylab
