#include "polylab/incidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace polylab {

Line Line::through(const Vec3& point, const Vec3& direction) {
  double n = norm(direction);
  if (!(n > 0)) usage_error("line direction must be nonzero");
  Line l;
  l.dir = (1.0 / n) * direction;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(l.dir[k]) > 1e-12) {
      if (l.dir[k] < 0) l.dir = -1.0 * l.dir;
      break;
    }
  }
  l.base = point - dot(point, l.dir) * l.dir;
  return l;
}

bool Line::same_as(const Line& o, double tol) const {
  return norm(base - o.base) <= tol * (1 + norm(base)) && norm(dir - o.dir) <= tol;
}

double Line::distance_to(const Vec3& x) const {
  Vec3 d = x - base;
  return norm(d - dot(d, dir) * dir);
}

nlohmann::json Line::to_json() const {
  return {{"base", {base[0], base[1], base[2]}}, {"dir", {dir[0], dir[1], dir[2]}}};
}

Line Line::from_json(const nlohmann::json& j) {
  try {
    auto vec = [](const nlohmann::json& a) {
      Vec3 v{0, 0, 0};
      if (a.size() < 2 || a.size() > 3) throw Error(ErrorCode::parse, "line vectors need 2 or 3 components");
      for (std::size_t k = 0; k < a.size(); ++k) v[k] = a[k].get<double>();
      return v;
    };
    const auto& b = j.contains("base") ? j.at("base") : j.at("point");
    return Line::through(vec(b), vec(j.at("dir")));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("line: ") + e.what());
  }
}

nlohmann::json lines_to_json(const std::vector<Line>& lines) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& l : lines) a.push_back(l.to_json());
  return {{"lines", a}};
}

std::vector<Line> lines_from_json(const nlohmann::json& j) {
  std::vector<Line> out;
  const auto& a = j.is_array() ? j : j.at("lines");
  for (const auto& l : a) out.push_back(Line::from_json(l));
  return out;
}

namespace {

bool intersect(const Line& a, const Line& b, Vec3& out) {
  double c = dot(a.dir, b.dir);
  double den = 1 - c * c;
  if (den < 1e-14) return false;
  Vec3 w = a.base - b.base;
  double d = dot(a.dir, w), e = dot(b.dir, w);
  double s = (c * e - d) / den, t = (e - c * d) / den;
  Vec3 p = a.at(s), q = b.at(t);
  if (norm(p - q) > kIncidenceTol * (1 + norm(p))) return false;
  out = 0.5 * (p + q);
  return true;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct CellHash {
  std::size_t operator()(const std::array<long long, 3>& k) const {
    return mix64(mix64(static_cast<std::uint64_t>(k[0])) ^ static_cast<std::uint64_t>(k[1]) * 31 ^
                 static_cast<std::uint64_t>(k[2]) * 1000003);
  }
};

}  // namespace

RichPointReport rich_points_bruteforce(const std::vector<Line>& lines, int r) {
  if (r < 2) usage_error("r must be at least 2");
  std::vector<Vec3> pts;
  std::vector<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      Vec3 p;
      if (intersect(lines[i], lines[j], p)) {
        pts.push_back(p);
        pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
      }
    }
  UnionFind uf(pts.size());
  std::unordered_map<std::array<long long, 3>, std::vector<int>, CellHash> grid;
  auto key_of = [](const Vec3& p, double h) {
    return std::array<long long, 3>{static_cast<long long>(std::floor(p[0] / h)),
                                    static_cast<long long>(std::floor(p[1] / h)),
                                    static_cast<long long>(std::floor(p[2] / h))};
  };
  double maxn = 0;
  for (const auto& p : pts) maxn = std::max(maxn, norm(p));
  const double h = kIncidenceTol * (1 + maxn);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto k = key_of(pts[i], h);
    bool absorbed = false;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          auto it = grid.find({k[0] + a, k[1] + b, k[2] + c});
          if (it == grid.end()) continue;
          for (int j : it->second)
            if (norm(pts[i] - pts[j]) <= kIncidenceTol * (1 + norm(pts[i]))) {
              uf.unite(static_cast<int>(i), j);
              absorbed = absorbed || (a == 0 && b == 0 && c == 0);
            }
        }
    // a point merged into its own grid cell is represented there already
    if (!absorbed) grid[k].push_back(static_cast<int>(i));
  }
  std::map<int, std::set<int>> clusters;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto& s = clusters[uf.find(static_cast<int>(i))];
    s.insert(pairs[i].first);
    s.insert(pairs[i].second);
  }
  RichPointReport rep;
  rep.r = r;
  for (const auto& [root, ls] : clusters) {
    if (static_cast<int>(ls.size()) < r) continue;
    RichPoint p;
    p.lines.assign(ls.begin(), ls.end());
    intersect(lines[p.lines[0]], lines[p.lines[1]], p.x);
    rep.points.push_back(std::move(p));
  }
  return rep;
}

bool line_in_surface(const Line& line, const Polynomial& P) {
  if (P.is_zero()) usage_error("line_in_surface with the zero polynomial");
  return line_in_zero_set(P, line.base, line.dir, std::max(1.0, norm(line.base)));
}

nlohmann::json CertificateNode::to_json() const {
  nlohmann::json j;
  j["lines"] = line_count;
  j["rich_points"] = rich_count;
  j["degree"] = degree;
  j["leaf"] = leaf;
  if (leaf) j["leaf_reason"] = leaf_reason;
  if (!leaf) {
    std::vector<int> degs;
    for (const auto& f : factors) degs.push_back(f.degree());
    j["factor_degrees"] = degs;
    j["wall"] = {{"lines_in_Z", wall.lines_in_Z},
                 {"points_crossing", wall.points_crossing},
                 {"points_Z_only", wall.points_Z_only},
                 {"count", wall.count()},
                 {"crossing_bound_DL", degree * line_count},
                 {"Z_bound_S2", wall.lines_in_Z * wall.lines_in_Z}};
    j["max_cells_per_line"] = max_cells_per_line;
    j["children"] = nlohmann::json::object();
    for (const auto& [k, c] : children) j["children"][k] = c->to_json();
  }
  return j;
}

namespace {

void check_rec(const CertificateNode& n, int depth, CertificateCheck& c) {
  ++c.nodes;
  c.depth = std::max(c.depth, depth);
  if (n.leaf) {
    ++c.leaves;
    c.leaf_total += n.rich_count;
    return;
  }
  long long sum = n.wall.count();
  c.wall_total += n.wall.count();
  for (const auto& [k, ch] : n.children) {
    sum += ch->rich_count;
    check_rec(*ch, depth + 1, c);
  }
  if (sum != n.rich_count) c.conservation = false;
  if (n.max_cells_per_line > n.degree + 1) c.crossing_discipline = false;
}

using Region = std::vector<std::pair<std::vector<Polynomial>, std::string>>;

struct Builder {
  const std::vector<Line>& lines;
  IncidenceOptions opt;
  Vec3 center{0, 0, 0};
  double radius = 1.0;
  std::uint64_t next_id = 0;

  bool in_region(const Region& reg, const Vec3& x) const {
    for (const auto& [f, key] : reg)
      if (cell_of(f, x) != key) return false;
    return true;
  }

  std::unique_ptr<CertificateNode> build(const std::vector<int>& ids, const Region& reg, int depth) {
    auto node = std::make_unique<CertificateNode>();
    const std::uint64_t id = next_id++;
    std::vector<Line> sub;
    for (int g : ids) sub.push_back(lines[g]);
    auto rp = rich_points_bruteforce(sub, opt.r);
    std::vector<RichPoint> pts;
    for (auto& p : rp.points) {
      if (!in_region(reg, p.x)) continue;
      for (int& l : p.lines) l = ids[l];
      pts.push_back(std::move(p));
    }
    node->line_count = static_cast<int>(ids.size());
    node->rich_count = static_cast<int>(pts.size());
    if (pts.empty()) {
      node->leaf_reason = "no rich points";
      return node;
    }
    if (node->line_count <= opt.leaf_threshold) {
      node->leaf_reason = "line threshold";
      return node;
    }
    if (depth >= opt.max_depth) {
      node->leaf_reason = "depth limit";
      return node;
    }
    WeightedPointSet X;
    X.dim = 3;
    for (const auto& p : pts) X.add(p.x);
    PartitionOptions po;
    po.seed = derive_seed(opt.seed, 0x1ce, id);
    po.restarts = 8;
    po.perturb = false;
    po.target = po.tol;
    auto part = partition_points(X, opt.degree, po);
    if (part.s() == 0) {
      node->leaf_reason = "partition unavailable";
      return node;
    }

    std::vector<char> in_Z(ids.size(), 0);
    std::set<int> z_lines;
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (const auto& f : part.factors)
        if (line_in_surface(lines[ids[i]], f)) {
          in_Z[i] = 1;
          z_lines.insert(ids[i]);
          break;
        }
    WallSummary wall;
    wall.lines_in_Z = static_cast<int>(z_lines.size());
    for (int i : part.wall) {
      bool all_z = std::all_of(pts[i].lines.begin(), pts[i].lines.end(), [&](int l) { return z_lines.count(l); });
      (all_z ? wall.points_Z_only : wall.points_crossing)++;
    }

    std::map<std::string, std::vector<int>> child_lines;
    int max_cells = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (in_Z[i]) continue;
      const Line& l = lines[ids[i]];
      double tc = dot(center - l.base, l.dir);
      auto cr = line_cell_crossings(part, l.base, l.dir, tc - radius - 1, tc + radius + 1);
      if (cr.contained) continue;
      std::set<std::string> distinct(cr.cells.begin(), cr.cells.end());
      max_cells = std::max(max_cells, static_cast<int>(distinct.size()));
      for (const auto& k : distinct)
        if (part.cells.count(k)) child_lines[k].push_back(ids[i]);
    }
    bool progress = false;
    for (const auto& [k, idx] : part.cells)
      if (!idx.empty() && child_lines[k].size() < ids.size()) progress = true;
    if (!progress && part.wall.empty()) {
      node->leaf_reason = "no progress";
      return node;
    }
    node->leaf = false;
    node->leaf_reason.clear();
    node->degree = part.degree();
    node->factors = part.factors;
    node->wall = wall;
    node->max_cells_per_line = max_cells;
    for (const auto& [k, idx] : part.cells) {
      if (idx.empty()) continue;
      Region child = reg;
      child.emplace_back(part.factors, k);
      node->children[k] = build(child_lines[k], child, depth + 1);
    }
    return node;
  }
};

}  // namespace

CertificateCheck check_certificate(const CertificateNode& root) {
  CertificateCheck c;
  check_rec(root, 0, c);
  return c;
}

IncidenceResult count_rich_points_partitioned(const std::vector<Line>& lines, const IncidenceOptions& opt) {
  if (opt.degree < 2) usage_error("partition degree must be at least 2");
  if (opt.leaf_threshold < 2) usage_error("leaf threshold must be at least 2");
  if (opt.r < 2) usage_error("r must be at least 2");
  Builder b{lines, opt};
  // Bounding ball of all intersection points fixes the parameter extent of crossings.
  auto all = rich_points_bruteforce(lines, 2);
  if (!all.points.empty()) {
    Vec3 lo = all.points[0].x, hi = lo;
    for (const auto& p : all.points)
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p.x[k]);
        hi[k] = std::max(hi[k], p.x[k]);
      }
    b.center = 0.5 * (lo + hi);
    b.radius = 0.5 * norm(hi - lo) * 1.01 + 1e-6;
  }
  std::vector<int> ids(lines.size());
  std::iota(ids.begin(), ids.end(), 0);
  IncidenceResult res;
  res.tree = b.build(ids, {}, 0);
  auto c = check_certificate(*res.tree);
  res.count = c.leaf_total + c.wall_total;
  return res;
}

ConfigKind config_kind_from(const std::string& name) {
  if (name == "planar") return ConfigKind::planar;
  if (name == "regulus") return ConfigKind::regulus;
  if (name == "pencil") return ConfigKind::pencil;
  if (name == "grid") return ConfigKind::grid;
  if (name == "random") return ConfigKind::random;
  usage_error("unknown configuration kind: " + name);
}

const char* config_kind_name(ConfigKind k) {
  switch (k) {
    case ConfigKind::planar: return "planar";
    case ConfigKind::regulus: return "regulus";
    case ConfigKind::pencil: return "pencil";
    case ConfigKind::grid: return "grid";
    case ConfigKind::random: return "random";
  }
  return "?";
}

namespace {

// Random unit directions, pairwise at least min_sin apart.
std::vector<Vec3> separated_directions(Rng& rng, int n, double min_sin) {
  std::vector<Vec3> out;
  while (static_cast<int>(out.size()) < n) {
    Vec3 d = random_unit(rng);
    bool ok = true;
    for (const auto& e : out)
      if (norm(cross(d, e)) < min_sin) ok = false;
    if (ok) out.push_back(d);
  }
  return out;
}

}  // namespace

std::vector<Line> generate_configuration(ConfigKind kind, int L, std::uint64_t seed) {
  if (L < 2) usage_error("a configuration needs at least two lines");
  Rng rng = make_rng(seed, 0x11e5, static_cast<std::uint64_t>(kind));
  std::vector<Line> out;
  auto rand_point = [](Rng& rng) { return Vec3{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}; };
  switch (kind) {
    case ConfigKind::planar: {
      Vec3 nrm = random_unit(rng);
      Vec3 u = normalized(cross(nrm, std::abs(nrm[0]) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0}));
      Vec3 v = cross(nrm, u);
      Vec3 p0 = rand_point(rng);
      std::vector<int> order(L);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (int i = 0; i < L; ++i) {
        // angles spread over [0, π) so no pair is near parallel
        double th = (order[i] + uniform(rng, 0.25, 0.75)) * M_PI / L;
        Vec3 d = std::cos(th) * u + std::sin(th) * v;
        Vec3 p = p0 + uniform(rng, -1, 1) * u + uniform(rng, -1, 1) * v;
        out.push_back(Line::through(p, d));
      }
      break;
    }
    case ConfigKind::regulus: {
      // rulings x = a, z = a y and y = b, z = b x of z = xy
      int na = (L + 1) / 2, nb = L / 2;
      auto params = [&](int n) {
        std::vector<double> p;
        for (int i = 0; i < n; ++i) p.push_back(-1 + (2.0 * i + uniform(rng, 0.2, 0.8)) / n);
        return p;
      };
      for (double a : params(na)) out.push_back(Line::through({a, 0, 0}, {0, 1, a}));
      for (double b : params(nb)) out.push_back(Line::through({0, b, 0}, {1, 0, b}));
      break;
    }
    case ConfigKind::pencil: {
      Vec3 p0 = rand_point(rng);
      for (const auto& d : separated_directions(rng, L, 0.5 / L)) out.push_back(Line::through(p0, d));
      break;
    }
    case ConfigKind::grid: {
      int k = std::max(1, static_cast<int>(std::floor(std::sqrt(L / 3.0))));
      auto coords = [&] {
        std::vector<double> c;
        for (int i = 0; i < k; ++i) c.push_back((i + uniform(rng, -0.3, 0.3)) / k);
        return c;
      };
      auto X = coords(), Y = coords(), Z = coords();
      std::vector<Line> raw;
      for (double y : Y)
        for (double z : Z) raw.push_back(Line::through({0, y, z}, {1, 0, 0}));
      for (double x : X)
        for (double z : Z) raw.push_back(Line::through({x, 0, z}, {0, 1, 0}));
      for (double x : X)
        for (double y : Y) raw.push_back(Line::through({x, y, 0}, {0, 0, 1}));
      auto dirs = separated_directions(rng, std::max(0, L - 3 * k * k), 0.5 / L);
      for (const auto& d : dirs) raw.push_back(Line::through(0.5 * (rand_point(rng) + Vec3{1, 1, 1}), d));
      // rigid motion
      Vec3 a = random_unit(rng);
      Vec3 b = normalized(cross(a, random_unit(rng)));
      Vec3 c = cross(a, b);
      Vec3 t = rand_point(rng);
      auto rot = [&](const Vec3& x) { return x[0] * a + x[1] * b + x[2] * c; };
      for (const auto& l : raw) out.push_back(Line::through(rot(l.base) + t, rot(l.dir)));
      break;
    }
    case ConfigKind::random: {
      for (const auto& d : separated_directions(rng, L, 0.5 / L)) out.push_back(Line::through(rand_point(rng), d));
      break;
    }
  }
  return out;
}

}  // namespace polylab
