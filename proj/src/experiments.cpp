#include "experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "polylab/incidence.hpp"
#include "polylab/partition.hpp"
#include "polylab/restriction.hpp"
#include "polylab/variety_tubes.hpp"

namespace polylab::exp {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr double kPi = std::numbers::pi;

struct Gate {
  std::string name;
  std::string relation;  // "<=", ">=", "==", "in"
  json bound;
  double measured = 0;
  bool pass = false;
};

struct Outcome {
  json rows = json::array();
  std::vector<Gate> gates;
  std::string csv;
  json artifacts = json::object();

  void le(const std::string& name, double measured, double bound) {
    gates.push_back({name, "<=", bound, measured, measured <= bound});
  }
  void ge(const std::string& name, double measured, double bound) {
    gates.push_back({name, ">=", bound, measured, measured >= bound});
  }
  void eq(const std::string& name, double measured, double bound) {
    gates.push_back({name, "==", bound, measured, measured == bound});
  }
  void in(const std::string& name, double measured, double lo, double hi) {
    gates.push_back({name, "in", json::array({lo, hi}), measured, measured >= lo && measured <= hi});
  }
  void row(json r, const std::string& gate) {
    r["gate"] = gate;
    rows.push_back(std::move(r));
  }
};

using Runner = std::function<Outcome(const json& cfg, int jobs)>;

struct Kind {
  json defaults;
  Runner run;
};

std::map<std::string, Kind>& registry();

std::uint64_t seed_of(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse, path + ": " + e.what());
  }
}

// A string names a file holding the value; anything else is the value itself.
json inline_or_file(const json& v) { return v.is_string() ? read_json_file(v.get<std::string>()) : v; }

std::string cell_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream o;
    o.precision(10);
    o << v.get<double>();
    return o.str();
  }
  if (v.is_primitive()) return v.dump();
  return "\"" + v.dump() + "\"";
}

// One CSV block per gate: the scalar columns of its rows, then the rows.
std::string rows_csv(const json& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const json*>> groups;
  for (const auto& r : rows) {
    const std::string g = r.value("gate", "");
    if (!groups.count(g)) order.push_back(g);
    groups[g].push_back(&r);
  }
  std::ostringstream o;
  for (const auto& g : order) {
    std::vector<std::string> cols;
    std::set<std::string> seen;
    for (const json* r : groups[g])
      for (auto it = r->begin(); it != r->end(); ++it)
        if (it.value().is_primitive() && seen.insert(it.key()).second) cols.push_back(it.key());
    if (&g != &order.front()) o << '\n';
    for (std::size_t c = 0; c < cols.size(); ++c) o << (c ? "," : "") << cols[c];
    o << '\n';
    for (const json* r : groups[g]) {
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c) o << ',';
        if (r->contains(cols[c])) o << cell_text(r->at(cols[c]));
      }
      o << '\n';
    }
  }
  return o.str();
}

void require(bool ok, const std::string& what) {
  if (!ok) usage_error(what);
}

std::vector<double> number_list(const json& cfg, const std::string& key) {
  std::vector<double> out;
  for (const auto& v : cfg.at(key)) out.push_back(v.get<double>());
  return out;
}

WeightedPointSet uniform_points(int dim, int n, std::uint64_t seed, const Vec3& shift = {0, 0, 0}) {
  Rng rng = make_rng(seed);
  WeightedPointSet s;
  s.dim = dim;
  for (int i = 0; i < n; ++i) {
    Vec3 x{0, 0, 0};
    for (int k = 0; k < dim; ++k) x[k] = uniform(rng, -1, 1) + shift[k];
    s.add(x);
  }
  return s;
}

// ---- partition family ----

Outcome run_hamsandwich(const json& cfg, int) {
  const int dim = cfg.at("dim"), N = cfg.at("sets"), n = cfg.at("points"), inst = cfg.at("instances");
  int D = cfg.at("degree");
  const double tol = cfg.at("tol");
  require(dim == 2 || dim == 3, "dim must be 2 or 3");
  require(N >= 1 && n >= 1 && inst >= 1, "sets, points and instances must be positive");
  if (D <= 0)
    for (D = 1; poly_space_dim(dim, D) - 1 < N; ++D) {
    }
  require(poly_space_dim(dim, D) - 1 >= N, "degree too small for the number of sets");
  Outcome out;
  double worst = 0, oracle_gap = -1e300;
  for (int i = 0; i < inst; ++i) {
    std::vector<WeightedPointSet> sets;
    Rng rng = make_rng(seed_of(cfg), 11, i);
    for (int j = 0; j < N; ++j)
      sets.push_back(uniform_points(dim, n, derive_seed(seed_of(cfg), i, j + 1),
                                    {uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5), uniform(rng, -0.5, 0.5)}));
    HamSandwichOptions o;
    o.tol = tol;
    o.seed = derive_seed(seed_of(cfg), i);
    o.restarts = cfg.at("restarts");
    const HamSandwichResult r = ham_sandwich_search(sets, D, o);
    worst = std::max(worst, r.max_imbalance);
    json row{{"instance", i}, {"sets", N}, {"degree", D}, {"max_imbalance", r.max_imbalance},
             {"poly_degree", r.P.degree()}};
    if (dim == 2 && N == 2 && D == 1) {
      const LineCut oc = exact_line_bisection(sets);
      row["oracle_imbalance"] = oc.max_imbalance;
      oracle_gap = std::max(oracle_gap, r.max_imbalance - oc.max_imbalance);
    }
    out.row(row, "imbalance");
  }
  out.le("imbalance", worst, tol);
  if (oracle_gap > -1e300) out.le("line_oracle", oracle_gap, tol);
  return out;
}

Outcome run_partition(const json& cfg, int) {
  WeightedPointSet X;
  const std::string input = cfg.at("input");
  if (!input.empty()) {
    X = WeightedPointSet::from_json(read_json_file(input));
  } else {
    const int dim = cfg.at("dim"), n = cfg.at("points");
    require(dim >= 1 && dim <= 3, "dim must be 1, 2 or 3");
    require(n >= 1 && n <= 1000000, "points must be in [1, 10^6]");
    X = uniform_points(dim, n, seed_of(cfg));
  }
  const int D = cfg.at("degree");
  require(D >= 1 && D <= 16, "degree must be in [1, 16]");
  PartitionOptions o;
  o.tol = cfg.at("tol");
  o.seed = seed_of(cfg);
  o.restarts = cfg.at("restarts");
  const Partition part = partition_points(X, D, o);
  const MassCertificate cert = certify_partition(part, X);
  Outcome out;
  double step_worst = 0;
  for (int k = 0; k < part.s(); ++k) {
    const double imb = k < static_cast<int>(part.step_imbalance.size()) ? part.step_imbalance[k] : 0.0;
    step_worst = std::max(step_worst, imb);
    out.row({{"step", k + 1}, {"factor_degree", part.factors[k].degree()}, {"imbalance", imb},
             {"nonsingular", static_cast<bool>(part.factor_nonsingular[k])}},
            "step_imbalance");
  }
  out.row({{"step", "cells"},
           {"points", X.size()},
           {"s", part.s()},
           {"degree", part.degree()},
           {"wall_points", part.wall.size()},
           {"nonempty_cells", cert.nonempty_cells},
           {"max_cell_weight", cert.max_cell_weight},
           {"off_wall_weight", cert.off_wall_weight},
           {"bound", cert.bound},
           {"recount_matches", cert.recount_matches}},
          "max_cell");
  out.le("step_imbalance", step_worst, o.tol);
  out.le("max_cell", cert.max_cell_weight, cert.bound);
  out.le("nonempty_cells", cert.nonempty_cells, std::pow(2.0, part.s()));
  out.eq("sign_recount", cert.recount_matches ? 1 : 0, 1);
  out.artifacts["partition"] = part.to_json();
  return out;
}

// ---- incidence family ----

Outcome run_incidence(const json& cfg, int) {
  std::vector<Line> lines;
  const bool generated = cfg.at("lines").is_null();
  const int L = cfg.at("L");
  const std::string kind = cfg.at("kind");
  if (generated) {
    require(L >= 2 && L <= 5000, "L must be in [2, 5000]");
    lines = generate_configuration(config_kind_from(kind), L, seed_of(cfg));
  } else {
    lines = lines_from_json(inline_or_file(cfg.at("lines")));
  }
  IncidenceOptions o;
  o.r = cfg.at("r");
  o.degree = cfg.at("degree");
  o.leaf_threshold = cfg.at("leaf_threshold");
  o.seed = seed_of(cfg);
  require(o.r >= 2, "r must be at least 2");
  require(o.degree >= 2, "degree must be at least 2");
  require(o.leaf_threshold >= 2, "leaf_threshold must be at least 2");
  const IncidenceResult res = count_rich_points_partitioned(lines, o);
  const CertificateCheck chk = check_certificate(*res.tree);
  Outcome out;
  json row{{"lines", lines.size()}, {"r", o.r}, {"degree", o.degree}, {"count", res.count}};
  if (cfg.at("bruteforce").get<bool>()) {
    const long long bf = static_cast<long long>(rich_points_bruteforce(lines, o.r).count());
    row["bruteforce"] = bf;
    out.eq("oracle_equivalence", static_cast<double>(res.count), static_cast<double>(bf));
  }
  out.row(row, "oracle_equivalence");
  out.row({{"nodes", chk.nodes},
           {"leaves", chk.leaves},
           {"depth", chk.depth},
           {"leaf_total", chk.leaf_total},
           {"wall_total", chk.wall_total},
           {"root_wall_lines_in_Z", res.tree->wall.lines_in_Z},
           {"conservation", chk.conservation},
           {"crossing_discipline", chk.crossing_discipline}},
          "certificate_conservation");
  out.eq("certificate_conservation", chk.conservation ? 1 : 0, 1);
  out.eq("crossing_discipline", chk.crossing_discipline ? 1 : 0, 1);
  if (generated && o.r == 2) {
    long long expect = -1;
    if (kind == "regulus") expect = static_cast<long long>((L + 1) / 2) * (L / 2);
    if (kind == "planar") expect = static_cast<long long>(L) * (L - 1) / 2;
    if (kind == "pencil") expect = 1;
    if (expect >= 0) {
      out.row({{"kind", kind}, {"L", L}, {"expected", expect}, {"count", res.count}}, "constructed_count");
      out.eq("constructed_count", static_cast<double>(res.count), static_cast<double>(expect));
    }
  }
  out.artifacts["certificate"] = res.tree->to_json();
  return out;
}

Outcome run_incidence_gen(const json& cfg, int) {
  const int L = cfg.at("L");
  require(L >= 2 && L <= 100000, "L must be in [2, 10^5]");
  const std::string kind = cfg.at("kind");
  const auto lines = generate_configuration(config_kind_from(kind), L, seed_of(cfg));
  int dup = 0;
  for (std::size_t i = 0; i < lines.size() && L <= 2000; ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) dup += lines[i].same_as(lines[j]);
  Outcome out;
  out.row({{"kind", kind}, {"L", L}, {"lines", lines.size()}, {"duplicates", dup}}, "distinct_lines");
  out.eq("distinct_lines", dup, 0);
  out.artifacts["lines"] = lines_to_json(lines);
  return out;
}

// ---- tubes family ----

Polynomial X3(int i) { return Polynomial::variable(3, i); }
Polynomial C3(double c) { return Polynomial::constant(3, c); }

// Named test surfaces; a non-null "poly" overrides the name.
Polynomial surface_poly(const json& cfg) {
  if (cfg.contains("poly") && !cfg.at("poly").is_null()) {
    Polynomial P = Polynomial::from_json(inline_or_file(cfg.at("poly")));
    require(P.num_vars() == 3, "poly must have three variables");
    require(!P.is_zero(), "poly must be nonzero");
    return P;
  }
  const std::string s = cfg.at("surface");
  if (s == "plane") return X3(2);
  if (s == "sphere") {
    const double r = cfg.at("radius");
    return X3(0) * X3(0) + X3(1) * X3(1) + X3(2) * X3(2) - C3(r * r);
  }
  if (s == "regulus") return cfg.at("scale").get<double>() * X3(2) - X3(0) * X3(1);
  if (s == "random") {
    Rng rng = make_rng(seed_of(cfg), 0x5eed);
    const int D = cfg.at("degree");
    require(D >= 1 && D <= 8, "degree must be in [1, 8]");
    const double sc = 1.0 / cfg.at("scale").get<double>();
    return Polynomial::random(3, D, rng).compose_affine({sc, 0, 0, 0, sc, 0, 0, 0, sc}, {0, 0, 0}, 3);
  }
  usage_error("unknown surface: " + s);
}

Tube tube_from_json(const json& t) {
  auto v = [](const json& a) { return Vec3{a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()}; };
  return Tube::make(v(t.at("center")), v(t.at("dir")), t.at("radius").get<double>(), t.at("length").get<double>());
}

Outcome run_tubes_classify(const json& cfg, int) {
  const Polynomial P = surface_poly(cfg);
  const double rho = cfg.at("rho"), len = cfg.at("length"), spread = cfg.at("spread");
  double thr = cfg.at("threshold");
  require(rho > 0 && len > 0, "rho and length must be positive");
  std::vector<Tube> tubes;
  if (!cfg.at("tubes").empty()) {
    for (const auto& t : cfg.at("tubes")) tubes.push_back(tube_from_json(t));
  } else {
    Rng rng = make_rng(seed_of(cfg), 0x7b);
    const int n = cfg.at("count");
    require(n >= 1 && n <= 100000, "count must be in [1, 10^5]");
    for (int i = 0; i < n; ++i) {
      const Vec3 c{uniform(rng, -spread, spread), uniform(rng, -spread, spread), uniform(rng, -2 * rho, 2 * rho)};
      // even tubes lie flat, odd ones point anywhere
      Vec3 d = random_unit(rng);
      if (i % 2 == 0) d = {d[0], d[1], 0};
      tubes.push_back(Tube::make(c, norm(d) > 1e-9 ? d : Vec3{1, 0, 0}, rho, len));
    }
  }
  double br = cfg.at("ball_radius");
  if (br <= 0) br = len;
  if (thr <= 0) thr = rho / len;
  const Ball ball{{0, 0, 0}, br};
  Outcome out;
  int bad = 0;
  for (std::size_t i = 0; i < tubes.size(); ++i) {
    json row{{"tube", i}};
    try {
      const TangencyReport r = classify_tube(tubes[i], P, ball, thr);
      row["class"] = tube_class_name(r.cls);
      row["max_angle"] = r.max_angle;
      row["witness_angle"] = r.witness_angle;
      row["witness_samples"] = r.witness_samples;
      if (r.cls == TubeClass::transverse && !(r.witness_angle > thr)) ++bad;
      if (r.cls == TubeClass::tangent && r.max_angle > thr) ++bad;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::singular_only) throw;
      row["class"] = "singular_only";
    }
    out.row(row, "dichotomy");
  }
  out.eq("dichotomy", bad, 0);
  out.artifacts["threshold"] = thr;
  return out;
}

Outcome run_tubes_segments(const json& cfg, int) {
  const int D = cfg.at("degree"), n = cfg.at("count");
  const double rho = cfg.at("rho"), a = cfg.at("a");
  require(a > 0 && a <= 0.1, "a must be in (0, 1/10]");
  require(rho > 0, "rho must be positive");
  require(D >= 1 && D <= 8, "degree must be in [1, 8]");
  require(n >= 1 && n <= 100000, "count must be in [1, 10^5]");
  const std::string s = cfg.at("surface");
  Rng rng = make_rng(seed_of(cfg), 0x5e9);
  Outcome out;
  int worst = 0, exact_fail = 0, singular = 0;
  if (s == "planes") {
    // D parallel planes spaced beyond the segment length
    const double seg = rho / a;
    Polynomial Q = C3(1);
    for (int k = 1; k <= D; ++k) Q = Q * (X3(0) - C3(k * seg * 1.1));
    const double len = (D + 2) * seg * 1.1 * 2;
    for (int i = 0; i < n; ++i) {
      const Tube T = Tube::make({len / 2 - seg, uniform(rng, -rho / 2, rho / 2), uniform(rng, -rho / 2, rho / 2)},
                                {1, 0, 0}, rho, len);
      const SegmentCount c = transverse_segment_count(T, Q, a);
      exact_fail += c.occupied != D;
      worst = std::max(worst, c.occupied);
      out.row({{"tube", i}, {"occupied", c.occupied}, {"segments", c.segments}, {"expected", D}}, "exact_count");
    }
    out.eq("exact_count", exact_fail, 0);
  } else {
    const Polynomial Q = surface_poly(cfg);
    const double len = cfg.at("length");
    for (int i = 0; i < n; ++i) {
      const Tube T = Tube::make({uniform(rng, -.5, .5), uniform(rng, -.5, .5), uniform(rng, -.5, .5)},
                                random_unit(rng), rho, len);
      json row{{"tube", i}, {"bound", 8 * Q.degree() * Q.degree() * Q.degree()}};
      try {
        const SegmentCount c = transverse_segment_count(T, Q, a);
        worst = std::max(worst, c.occupied);
        row["occupied"] = c.occupied;
        row["segments"] = c.segments;
        row["survivors"] = c.survivors;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::singular_only) throw;
        ++singular;
        row["occupied"] = nullptr;
      }
      out.row(row, "segment_bound");
    }
    const int Dq = Q.degree();
    out.le("segment_bound", worst, 8.0 * Dq * Dq * Dq);
    out.artifacts["measured_constant"] = worst / std::pow(static_cast<double>(Dq), 3);
    out.artifacts["singular_only"] = singular;
  }
  return out;
}

Outcome run_tubes_census(const json& cfg, int) {
  const std::string s = cfg.at("surface");
  const double rho = 1.0, L = cfg.at("L_over_rho").get<double>() * rho;
  const int n = cfg.at("count");
  require(L >= 4, "L_over_rho must be at least 4");
  require(n >= 1 && n <= 20000, "count must be in [1, 20000]");
  Rng rng = make_rng(seed_of(cfg), 0xce5);
  std::vector<Tube> tubes;
  Polynomial P;
  int expected = -1;
  if (s == "plane") {
    P = X3(2);
    const int m = cfg.at("tangent");
    require(m >= 0 && m <= n, "tangent must be in [0, count]");
    for (int i = 0; i < n; ++i) {
      const double phi = kPi * (i % std::max(m, 1)) / std::max(m, 1) + 0.01;
      const double elev = i < m ? 0.5 * rho / L : uniform(rng, 3 * rho / L, kPi / 2);
      tubes.push_back(Tube::make(
          {0, 0, 0}, {std::cos(elev) * std::cos(phi), std::cos(elev) * std::sin(phi), std::sin(elev)}, rho, L));
    }
    expected = m;
  } else if (s == "regulus") {
    const double Lambda = 16 * L, step = 1.5 * Lambda * rho / L;
    P = Lambda * X3(2) - X3(0) * X3(1);
    const int m = cfg.at("tangent");
    require(m >= 1 && 2 * m <= n, "regulus census needs 1 <= tangent <= count / 2");
    for (int i = 0; i < m; ++i) {
      const double a = (i - (m - 1) / 2.0) * step;
      tubes.push_back(Tube::make({a, 0, 0}, {0, Lambda, a}, rho, L));
      tubes.push_back(Tube::make({0, a, 0}, {Lambda, 0, a}, rho, L));
    }
    for (int i = 2 * m; i < n; ++i) {
      const double x = uniform(rng, -L / 4, L / 4), y = uniform(rng, -L / 4, L / 4);
      tubes.push_back(
          Tube::make({x, y, x * y / Lambda}, {uniform(rng, -.3, .3), uniform(rng, -.3, .3), 1}, rho, L));
    }
    expected = 2 * m;
  } else if (s == "random") {
    if (!cfg.at("poly").is_null()) {
      P = surface_poly(cfg);
    } else {
      // unit-scale random surface, recentred on one of its smooth points and
      // stretched to curvature radius ~ 4 L^2 / rho so tangent tubes exist
      json c = cfg;
      c["scale"] = 1.0;
      const Polynomial Q = surface_poly(c);
      std::vector<Vec3> z0;
      for (const auto& z : sample_zero_set(Q, Box{}, 0.1))
        if (z.nonsingular) z0.push_back(z.x);
      require(!z0.empty(), "the random surface misses the unit cube; change the seed");
      const double sc = rho / (4 * L * L);
      P = Q.compose_affine({sc, 0, 0, 0, sc, 0, 0, 0, sc}, {z0[0][0], z0[0][1], z0[0][2]}, 3);
    }
    const auto grad = gradient(P);
    std::vector<ZeroSample> zs;
    for (const auto& z : sample_zero_set(P, Box{{-L / 2, -L / 2, -L / 2}, {L / 2, L / 2, L / 2}}, L / 8))
      if (z.nonsingular) zs.push_back(z);
    require(!zs.empty(), "the random surface misses the ball; change the seed");
    for (int i = 0; i < n; ++i) {
      const ZeroSample& z = zs[(i * 7919) % zs.size()];
      Vec3 d = random_unit(rng);
      if (i % 2 == 0) {
        const Vec3 g = normalized(eval_gradient(grad, z.x));
        const Vec3 t = d - dot(d, g) * g;
        if (norm(t) > 1e-6) d = normalized(t);
      }
      tubes.push_back(Tube::make(z.x, d, rho, L));
    }
  } else {
    usage_error("unknown census surface: " + s);
  }
  const CensusResult r = tangent_direction_census(tubes, P, Ball{{0, 0, 0}, L}, rho, L, rho / L, {rho});
  Outcome out;
  const double D = std::max(1, P.degree());
  json row{{"surface", s}, {"L_over_rho", L / rho}, {"tubes", n}, {"degree", P.degree()}, {"tangent", r.tangent},
           {"transverse", r.transverse}, {"disjoint", r.disjoint}, {"census", r.census}, {"bound", r.bound}};
  if (expected >= 0) {
    row["expected"] = expected;
    out.row(row, "constructed_census");
    out.eq("constructed_census", r.census, expected);
  } else {
    const double b = 8 * D * D * std::pow(std::log(L / rho), 2) * L / rho;
    row["measured_constant"] = r.census / (D * D * std::pow(std::log(L / rho), 2) * L / rho);
    out.row(row, "census_bound");
    out.le("census_bound", r.census, b);
  }
  return out;
}

Outcome run_wongkew(const json& cfg, int jobs) {
  std::vector<int> dims;
  for (const auto& d : cfg.at("dims")) dims.push_back(d.get<int>());
  require(dims.size() >= 1 && dims.size() <= 3, "dims needs 1 to 3 entries");
  for (std::size_t k = 0; k < dims.size(); ++k) {
    require(dims[k] >= 1 && dims[k] <= 1024, "dims entries must be in [1, 1024]");
    if (k) require(dims[k - 1] <= dims[k], "dims must be nondecreasing");
  }
  const int m = cfg.at("subsample");
  require(m >= 2 && m <= 16, "subsample must be in [2, 16]");
  const std::string s = cfg.at("surface");
  std::vector<std::vector<int>> sweep{dims};
  if (!cfg.at("L_list").empty()) {
    sweep.clear();
    for (const auto& L : cfg.at("L_list")) {
      require(L.get<int>() >= 2 && L.get<int>() <= 512, "L_list entries must be in [2, 512]");
      sweep.push_back(std::vector<int>(dims.size(), L.get<int>()));
    }
  }
  Outcome out;
  std::vector<double> consts;
  int exact_fail = 0;
  for (const auto& dm : sweep) {
    const int n = static_cast<int>(dm.size());
    auto var = [n](int i) { return Polynomial::variable(n, i); };
    auto cst = [n](double c) { return Polynomial::constant(n, c); };
    Polynomial P;
    long long expected = -1;
    if (!cfg.at("poly").is_null()) {
      P = Polynomial::from_json(inline_or_file(cfg.at("poly")));
      require(P.num_vars() == n, "poly variables must match dims");
    } else if (s == "sphere") {
      const double h = dm[0] / 2.0;
      P = cst(-h * h);
      for (int i = 0; i < n; ++i) P += (var(i) - cst(dm[i] / 2.0)) * (var(i) - cst(dm[i] / 2.0));
    } else if (s == "slabs") {
      const int k = cfg.at("k");
      require(k >= 1 && k <= dm[0], "k must be in [1, dims[0]]");
      P = cst(1);
      for (int j = 0; j < k; ++j) P = P * (var(0) - cst(j + 0.5));
      expected = k;
      for (int i = 1; i < n; ++i) expected *= dm[i];
    } else {
      usage_error("unknown wongkew surface: " + s);
    }
    CubeCountOptions o;
    o.subsample = m;
    o.jobs = jobs;
    const long long c = count_cubes_meeting_zero_set(P, dm, o);
    double prod = 1;
    for (int i = 1; i < n; ++i) prod *= dm[i];
    const double C = c / (std::max(1, P.degree()) * prod);
    consts.push_back(C);
    json row{{"dims", dm}, {"degree", P.degree()}, {"count", c}, {"measured_constant", C}};
    if (expected >= 0) {
      row["expected"] = expected;
      exact_fail += c != expected;
    }
    out.row(row, expected >= 0 ? "exact_count" : "wongkew_constant");
  }
  out.le("wongkew_constant", *std::max_element(consts.begin(), consts.end()), 8.0);
  if (consts.size() >= 2) {
    double dev = 0;
    for (double c : consts) dev = std::max(dev, std::abs(c / consts[0] - 1));
    out.le("wongkew_stability", dev, 0.3);
  }
  if (s == "slabs" && cfg.at("poly").is_null()) out.eq("exact_count", exact_fail, 0);
  return out;
}

// ---- restriction family ----

// Compact tau labels of f's support on the K grid.
void tau_labels(const FreqField& f, int K, std::vector<int>& lab, int& nl) {
  std::map<int, int> ids;
  lab.assign(f.size(), -1);
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j)
      if (std::abs(f.at(i, j)) > 0) ids[tau_cell({f.w1(i), f.w2(j)}, K)] = 0;
  nl = 0;
  for (auto& [c, id] : ids) id = nl++;
  for (int i = 0; i < f.n1; ++i)
    for (int j = 0; j < f.n2; ++j)
      if (std::abs(f.at(i, j)) > 0) lab[static_cast<std::size_t>(i) * f.n2 + j] = ids[tau_cell({f.w1(i), f.w2(j)}, K)];
}

Outcome run_field(const json& cfg, int jobs) {
  const auto S = SurfaceSpec::paraboloid();
  const double R = cfg.at("R");
  const int K = cfg.at("K");
  require(R >= 8 && R <= 1024, "R must be in [8, 1024]");
  require(K >= 1 && K <= 64, "K must be in [1, 64]");
  const std::string ex = cfg.at("example");
  double half = cfg.at("half_width");
  if (half <= 0) half = R / 2;
  require(half <= R, "half_width must be at most R");
  FreqField f;
  std::vector<int> lab;
  int nl = 0;
  if (ex == "random") {
    f = random_test_function(S, R, wave_packet_dw(R), seed_of(cfg), cfg.at("bumps"));
    tau_labels(f, K, lab, nl);
  } else if (ex == "planar" || ex == "regulus") {
    ExampleField e;
    if (ex == "planar") {
      PlanarOptions o;
      o.R = R;
      o.K = K;
      o.B = cfg.at("B");
      o.seed = seed_of(cfg);
      e = build_planar_example(S, o);
    } else {
      RegulusOptions o;
      o.R = R;
      o.K = K;
      o.seed = seed_of(cfg);
      e = build_regulus_example(S, o);
    }
    f = e.f;
    lab = e.label;
    nl = e.num_labels;
  } else {
    usage_error("unknown field example: " + ex);
  }
  const double side = 2 * half + 2;
  const double bytes = 16.0 * side * side * side * (nl + 1);
  require(bytes <= cfg.at("memory_budget").get<double>(),
          "estimated field memory " + std::to_string(bytes) + " bytes exceeds memory_budget");
  const Vec3 lo{-half, -half, -half}, hi{half, half, half};
  const auto taus = extension_fields(S, f, &lab, nl, R, lo, hi, jobs);
  const ComplexField ef = extension_field(S, f, R, lo, hi, jobs);
  const double p = cfg.at("p");
  Outcome out;
  long long viol = 0;
  for (const auto& a : cfg.at("alpha_list")) {
    const double alpha = a.get<double>();
    const BroadResult br = broad_part(ef, taus, alpha);
    double bp = 0;
    for (double b : br.broad) bp += std::pow(b, p);
    bp = std::pow(bp * std::pow(ef.grid.dx, 3), 1 / p);
    viol += br.identity_violations;
    out.row({{"alpha", alpha},
             {"points", br.points},
             {"broad_points", br.broad_points},
             {"broad_fraction", static_cast<double>(br.broad_points) / static_cast<double>(br.points)},
             {"broad_norm", bp},
             {"field_norm", ef.lp_norm(p)},
             {"identity_violations", br.identity_violations}},
            "broad_narrow_identity");
  }
  out.eq("broad_narrow_identity", static_cast<double>(viol), 0);
  out.artifacts["f_l2"] = l2_norm(S, f);
  out.artifacts["labels"] = nl;
  out.artifacts["dx"] = ef.grid.dx;
  return out;
}

Outcome run_decompose(const json& cfg, int jobs) {
  const auto S = SurfaceSpec::paraboloid();
  const double R = cfg.at("R");
  const int trials = cfg.at("trials");
  require(R >= 16 && R <= 1024, "R must be in [16, 1024]");
  require(trials >= 1 && trials <= 1000, "trials must be in [1, 1000]");
  WavePacketOptions opt;
  opt.delta = cfg.at("delta");
  Outcome out;
  double rec = 0, dec = 0, bud = 0;
  bool support = true;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = derive_seed(seed_of(cfg), t);
    const FreqField f = random_test_function(S, R, wave_packet_dw(R, opt), s);
    WavePacketSet wp(S, f, R, opt);
    PropertyOptions po;
    po.seed = s;
    po.points = cfg.at("points");
    po.jobs = jobs;
    const PropertyReport r = check_wave_packets(wp, po);
    rec = std::max(rec, r.reconstruction_error);
    dec = std::max(dec, r.decay_max);
    bud = std::max(bud, r.budget_max);
    support = support && r.support_ok;
    json row = r.to_json();
    row["trial"] = t;
    out.row(row, "reconstruction");
  }
  out.le("reconstruction", rec, 1e-3);
  out.le("packet_budget", bud, 4);
  out.eq("support", support ? 1 : 0, 1);
  out.le("off_tube_decay", dec, 1e-6);
  if (cfg.at("mechanism").get<bool>()) {
    const double a = packet_decay_ratio(S, R, opt), b = packet_decay_ratio(S, 2 * R, opt);
    out.row({{"R", R}, {"decay_ratio", a}}, "decay_mechanism");
    out.row({{"R", 2 * R}, {"decay_ratio", b}}, "decay_mechanism");
    out.le("decay_mechanism", b / a, 1 - 1e-12);
  }
  return out;
}

Outcome run_planar(const json& cfg, int jobs) {
  const auto S = SurfaceSpec::paraboloid();
  PlanarOptions o;
  o.R = cfg.at("R");
  o.B = cfg.at("B");
  o.K = cfg.at("K");
  o.seed = seed_of(cfg);
  require(o.R >= 16 && o.R <= 2048, "R must be in [16, 2048]");
  const ExampleField ex = build_planar_example(S, o);
  const double alpha = cfg.at("alpha"), p = cfg.at("p");
  const EvalRegion slab = slab_region(ex, cfg.at("slab").get<double>() * std::sqrt(o.R));
  const RegionStats st = region_stats(S, ex, slab, alpha, {p}, jobs);
  const double overlap =
      tube_overlap_fraction(ex, slab_region(ex, ex.meta.at("slab_half_width").get<double>()), o.B / 2.0);
  const double pred = ex.meta.at("predicted_l2");
  Outcome out;
  out.row({{"R", o.R},
           {"B", o.B},
           {"f_l2", ex.l2},
           {"f_l2_predicted", pred},
           {"f_linf", ex.linf},
           {"f_linf_predicted", o.B * o.R}},
          "l2_prediction");
  out.row({{"R", o.R},
           {"alpha", alpha},
           {"p", p},
           {"broad_norm", st.broad_norm(0)},
           {"field_norm", std::pow(st.all_pow[0], 1 / p)},
           {"broad_fraction", st.broad_fraction()},
           {"points", st.points},
           {"tube_overlap", overlap},
           {"identity_violations", st.identity_violations}},
          "broad_narrow_identity");
  out.in("l2_prediction", ex.l2 / pred, 0.5, 2.0);
  out.le("linf_prediction", ex.linf / (o.B * o.R), 1.0);
  out.ge("tube_overlap", overlap, 0.5);
  out.eq("broad_narrow_identity", static_cast<double>(st.identity_violations), 0);
  out.artifacts["example"] = ex.summary();
  return out;
}

Outcome run_regulus(const json& cfg, int jobs) {
  const auto S = SurfaceSpec::paraboloid();
  RegulusOptions o;
  o.R = cfg.at("R");
  o.K = cfg.at("K");
  o.seed = seed_of(cfg);
  require(o.R >= 16 && o.R <= 1024, "R must be in [16, 1024]");
  const double alpha = cfg.at("alpha");
  const ExampleField both = build_regulus_example(S, o);
  const EvalRegion region = regulus_region(both, both.meta.at("half_width").get<double>());
  const double coverage = tube_overlap_fraction(both, region, 0);
  Outcome out;
  std::map<int, double> frac;
  long long viol = 0;
  for (int fam : {3, 1, 2}) {
    o.families = fam;
    const ExampleField ex = fam == 3 ? both : build_regulus_example(S, o);
    const RegionStats st = region_stats(S, ex, region, alpha, {3.0}, jobs);
    frac[fam] = static_cast<double>(st.broad_points) / static_cast<double>(st.points);
    viol += st.identity_violations;
    out.row({{"families", fam == 3 ? "both" : (fam == 1 ? "first" : "second")},
             {"broad_fraction", frac[fam]},
             {"points", st.points},
             {"broad_norm_p3", st.broad_norm(0)},
             {"f_l2", ex.l2},
             {"identity_violations", st.identity_violations}},
            "two_family_broadness");
  }
  const double mis = both.summary().at("max_mismatch_angle");
  out.row({{"coverage", coverage}, {"max_mismatch_angle", mis}, {"packets", both.packets.size()}}, "coverage");
  out.eq("coverage", coverage, 1.0);
  out.le("mismatch", mis, 1 / std::sqrt(o.R));
  out.ge("two_family_broadness", frac[3], 0.3);
  out.le("one_family_broadness", std::max(frac[1], frac[2]), frac[3] / 3);
  out.eq("broad_narrow_identity", static_cast<double>(viol), 0);
  out.artifacts["example"] = both.summary();
  return out;
}

Outcome run_scaling(const json& cfg, int jobs) {
  ScalingOptions o;
  o.example = cfg.at("example");
  o.R_list = number_list(cfg, "R_list");
  o.p_list = number_list(cfg, "p_list");
  require(!o.R_list.empty(), "R_list is empty");
  require(!o.p_list.empty(), "p_list is empty");
  o.alpha = cfg.at("alpha");
  o.K = cfg.at("K");
  o.B = cfg.at("B");
  o.seed = seed_of(cfg);
  o.trials = cfg.at("trials");
  o.jobs = jobs;
  const ScalingReport rep = scaling_experiment(SurfaceSpec::paraboloid(), o);
  Outcome out;
  const json j = rep.to_json();
  for (const auto& r : j.at("rows")) out.row(r, "sharpness_slopes");
  for (std::size_t k = 0; k < o.p_list.size(); ++k) {
    const double p = o.p_list[k];
    if (std::abs(p - 3.25) < 1e-12) {
      out.in("lhs_slope_p3.25", rep.lhs_fit[k].slope, 10.0 / 13 - 0.12, 10.0 / 13 + 0.12);
      out.in("ratio_slope_p3.25", rep.ratio_fit[k].slope, -0.15, 0.15);
    }
    if (std::abs(p - 3.0) < 1e-12) out.ge("ratio_slope_p3", rep.ratio_fit[k].slope, 0.05);
  }
  long long viol = 0;
  for (const auto& r : rep.rows) viol += r.identity_violations;
  out.eq("broad_narrow_identity", static_cast<double>(viol), 0);
  out.csv = rep.csv();
  out.artifacts["fits"] = j.at("fits");
  out.artifacts["l2_fit"] = j.at("l2_fit");
  out.artifacts["linf_fit"] = j.at("linf_fit");
  return out;
}

Outcome run_bilinear(const json& cfg, int jobs) {
  const auto Rs = number_list(cfg, "R_list");
  require(!Rs.empty(), "R_list is empty");
  for (double R : Rs) require(R >= 16 && R <= 1024, "R_list entries must be in [16, 1024]");
  const double sep = cfg.at("separation");
  require(sep > 0 && sep < 1.5, "separation must be in (0, 1.5)");
  const BilinearReport rep = bilinear_sweep(SurfaceSpec::paraboloid(), Rs, sep, seed_of(cfg), jobs);
  Outcome out;
  json j = rep.to_json();
  for (auto r : j.at("rows")) {
    r.erase("cubes");
    out.row(r, "bilinear_slope");
  }
  out.in("bilinear_slope", rep.fit.slope, -0.65, -0.35);
  out.le("l2_ball_ratio", rep.l2_ratio_max, 8.0);
  out.csv = rep.csv();
  out.artifacts["fit"] = j.at("fit");
  return out;
}

std::map<std::string, Kind>& registry() {
  static std::map<std::string, Kind> r = [] {
    std::map<std::string, Kind> m;
    m["hamsandwich"] = {{{"dim", 2}, {"sets", 2}, {"points", 100}, {"degree", 0}, {"tol", 0.05}, {"seed", 1},
                         {"instances", 10}, {"restarts", 24}},
                        run_hamsandwich};
    m["partition"] = {{{"input", ""}, {"dim", 2}, {"points", 4096}, {"degree", 8}, {"tol", 0.05}, {"seed", 1},
                       {"restarts", 24}},
                      run_partition};
    m["incidence"] = {{{"lines", nullptr}, {"kind", "regulus"}, {"L", 20}, {"seed", 1}, {"r", 2}, {"degree", 3},
                       {"leaf_threshold", 32}, {"bruteforce", true}},
                      run_incidence};
    m["incidence.gen"] = {{{"kind", "regulus"}, {"L", 40}, {"seed", 1}}, run_incidence_gen};
    m["tubes.classify"] = {{{"surface", "plane"}, {"poly", nullptr}, {"radius", 100.0}, {"scale", 64.0},
                            {"degree", 3}, {"tubes", json::array()}, {"count", 20}, {"rho", 1.0},
                            {"length", 64.0}, {"spread", 16.0}, {"threshold", 0.0}, {"ball_radius", 0.0},
                            {"seed", 1}},
                           run_tubes_classify};
    m["tubes.segments"] = {{{"surface", "random"}, {"poly", nullptr}, {"degree", 3}, {"scale", 1.0},
                            {"count", 100}, {"rho", 0.02}, {"a", 0.1}, {"length", 2.0}, {"seed", 1}},
                           run_tubes_segments};
    m["tubes.census"] = {{{"surface", "plane"}, {"poly", nullptr}, {"degree", 2}, {"L_over_rho", 64.0},
                          {"count", 100}, {"tangent", 37}, {"seed", 1}},
                         run_tubes_census};
    m["wongkew"] = {{{"surface", "sphere"}, {"poly", nullptr}, {"dims", {32, 32, 32}}, {"subsample", 3},
                     {"k", 3}, {"L_list", json::array()}, {"seed", 1}},
                    run_wongkew};
    m["restriction.field"] = {{{"R", 32.0}, {"example", "random"}, {"K", 4}, {"B", 2}, {"bumps", 8},
                               {"alpha_list", {0.1, 0.2, 0.4}}, {"p", 3.25}, {"half_width", 0.0},
                               {"memory_budget", 2e9}, {"seed", 1}},
                              run_field};
    m["restriction.decompose"] = {{{"R", 64.0}, {"trials", 2}, {"delta", 0.24}, {"points", 60},
                                   {"mechanism", true}, {"seed", 1}},
                                  run_decompose};
    m["restriction.planar"] = {{{"R", 64.0}, {"B", 4}, {"K", 16}, {"alpha", 0.9}, {"p", 3.25}, {"slab", 3.0},
                                {"seed", 1}},
                               run_planar};
    m["restriction.regulus"] = {{{"R", 128.0}, {"K", 4}, {"alpha", 0.75}, {"seed", 1}}, run_regulus};
    m["restriction.scaling"] = {{{"example", "planar"}, {"R_list", {64, 128, 256, 512}}, {"p_list", {3.25, 3.0}},
                                 {"alpha", 0.9}, {"K", 16}, {"B", 4}, {"trials", 1}, {"seed", 1}},
                                run_scaling};
    m["restriction.bilinear"] = {{{"R_list", {64, 128, 256}}, {"separation", 0.5}, {"seed", 1}}, run_bilinear};
    return m;
  }();
  return r;
}

const Kind& lookup(const std::string& kind) {
  auto it = registry().find(kind);
  if (it == registry().end()) usage_error("unknown experiment: " + kind);
  return it->second;
}

json coerce(const std::string& key, const json& def, const json& v) {
  auto bad = [&](const char* want) -> json { usage_error("config key '" + key + "' must be " + want); };
  if (def.is_null()) return v;
  if (def.is_boolean()) return v.is_boolean() ? v : bad("a boolean");
  if (def.is_string()) return v.is_string() ? v : bad("a string");
  if (def.is_array()) {
    if (!v.is_array()) return bad("an array");
    if (!def.empty() && def[0].is_number())
      for (const auto& e : v)
        if (!e.is_number()) return bad("an array of numbers");
    return v;
  }
  if (def.is_number_integer() || def.is_number_unsigned()) {
    if (!v.is_number()) return bad("an integer");
    const double d = v.get<double>();
    if (d != std::floor(d)) return bad("an integer");
    if (key == "seed") {
      if (d < 0) return bad("a nonnegative integer");
      return v.is_number_float() ? json(static_cast<std::uint64_t>(d)) : v;
    }
    return json(static_cast<long long>(d));
  }
  if (def.is_number_float()) return v.is_number() ? json(v.get<double>()) : bad("a number");
  return v;
}

std::string first_key_diff(const json& a, const json& b) {
  if (a.is_object() && b.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it)
      if (!b.contains(it.key()) || b.at(it.key()) != it.value()) return it.key();
    for (auto it = b.begin(); it != b.end(); ++it)
      if (!a.contains(it.key())) return it.key();
  }
  return "";
}

}  // namespace

std::vector<std::string> kinds() {
  std::vector<std::string> out;
  for (const auto& [k, v] : registry()) out.push_back(k);
  return out;
}

json default_config(const std::string& kind) { return lookup(kind).defaults; }

json resolve_config(const std::string& kind, const json& user) {
  json cfg = lookup(kind).defaults;
  if (user.is_null()) return cfg;
  if (!user.is_object()) usage_error("config must be a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (it.key() == "experiment") continue;
    if (!cfg.contains(it.key())) usage_error("unknown config key for " + kind + ": " + it.key());
    cfg[it.key()] = coerce(it.key(), cfg.at(it.key()), it.value());
  }
  return cfg;
}

json run(const std::string& kind, const json& user_config, int jobs) {
  if (jobs < 1 || jobs > 256) usage_error("jobs must be in [1, 256]");
  const json cfg = resolve_config(kind, user_config);
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = lookup(kind).run(cfg, jobs);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::usage, std::string("bad config value: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json gates = json::array();
  bool pass = true;
  for (const auto& g : out.gates) {
    gates.push_back(
        {{"name", g.name}, {"relation", g.relation}, {"bound", g.bound}, {"measured", g.measured}, {"pass", g.pass}});
    pass = pass && g.pass;
  }
  json rep;
  rep["experiment"] = kind;
  rep["version"] = kVersion;
  rep["config"] = cfg;
  rep["jobs"] = jobs;
  rep["rows"] = out.rows;
  rep["gates"] = gates;
  rep["pass"] = pass;
  rep["csv"] = out.csv.empty() ? rows_csv(out.rows) : out.csv;
  rep["artifacts"] = out.artifacts;
  rep["wall_clock_s"] = secs;
  return rep;
}

json replay(const json& report, const json& overrides, int jobs) {
  if (!report.is_object() || !report.contains("config") || !report.contains("experiment"))
    usage_error("report has no embedded config");
  if (!report.contains("rows") || !report.at("rows").is_array()) usage_error("report has no rows");
  const std::string kind = report.at("experiment");
  json cfg = report.at("config");
  if (!overrides.is_null()) {
    if (!overrides.is_object()) usage_error("overrides must be a JSON object");
    for (auto it = overrides.begin(); it != overrides.end(); ++it) cfg[it.key()] = it.value();
  }
  json fresh = run(kind, cfg, jobs);
  // compare through the serialized form the stored report went through
  const json now = json::parse(fresh.at("rows").dump());
  const json& was = report.at("rows");
  long long diffs = 0;
  json first = nullptr;
  const std::size_t n = std::max(now.size(), was.size());
  for (std::size_t i = 0; i < n; ++i) {
    const json a = i < was.size() ? was[i] : json(nullptr);
    const json b = i < now.size() ? now[i] : json(nullptr);
    if (a == b) continue;
    ++diffs;
    if (first.is_null()) {
      first = {{"row", i}, {"expected", a}, {"actual", b}};
      const std::string key = first_key_diff(a, b);
      if (!key.empty()) first["key"] = key;
    }
  }
  json out;
  out["experiment"] = "replay";
  out["replayed"] = kind;
  out["overrides"] = overrides.is_null() ? json::object() : overrides;
  out["rows_compared"] = n;
  out["diffs"] = diffs;
  out["first_divergence"] = first;
  out["pass"] = diffs == 0;
  out["report"] = std::move(fresh);
  return out;
}

json error_object(int code, const std::string& name, const std::string& message) {
  return {{"error", {{"code", code}, {"name", name}, {"message", message}}}};
}

}  // namespace polylab::exp
