// Lines, r-rich points, and the partitioning divide-and-conquer count with a
// checkable certificate tree.
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "polylab/partition.hpp"

namespace polylab {

struct Line {
  Vec3 base{0, 0, 0};  // closest point to the origin
  Vec3 dir{1, 0, 0};   // unit, first nonzero component positive

  static Line through(const Vec3& point, const Vec3& direction);
  bool same_as(const Line& o, double tol = 1e-10) const;
  Vec3 at(double t) const { return base + t * dir; }
  double distance_to(const Vec3& x) const;

  nlohmann::json to_json() const;
  static Line from_json(const nlohmann::json& j);
};

nlohmann::json lines_to_json(const std::vector<Line>& lines);
std::vector<Line> lines_from_json(const nlohmann::json& j);

struct RichPoint {
  Vec3 x;
  std::vector<int> lines;  // sorted indices of incident lines
  int multiplicity() const { return static_cast<int>(lines.size()); }
};

struct RichPointReport {
  int r = 2;
  std::vector<RichPoint> points;
  std::size_t count() const { return points.size(); }
};

inline constexpr double kIncidenceTol = 1e-8;

// All pairwise intersections, union-find clustered at 1e-8.
RichPointReport rich_points_bruteforce(const std::vector<Line>& lines, int r);

// The line lies in Z(P): deg P + 1 evaluations under the zero tolerance.
bool line_in_surface(const Line& line, const Polynomial& P);

struct WallSummary {
  int lines_in_Z = 0;
  int points_crossing = 0;  // wall rich points involving a line not in Z
  int points_Z_only = 0;    // wall rich points whose lines all lie in Z
  int count() const { return points_crossing + points_Z_only; }
};

struct CertificateNode {
  int line_count = 0;
  int rich_count = 0;
  int degree = 0;  // deg P of this node's partition; 0 at a leaf
  bool leaf = true;
  std::string leaf_reason;
  std::vector<Polynomial> factors;
  WallSummary wall;
  int max_cells_per_line = 0;
  std::map<std::string, std::unique_ptr<CertificateNode>> children;

  nlohmann::json to_json() const;
};

struct CertificateCheck {
  bool conservation = true;     // every node: rich = Σ children + wall (leaves count directly)
  bool crossing_discipline = true;
  int nodes = 0, leaves = 0, depth = 0;
  long long leaf_total = 0, wall_total = 0;
};
CertificateCheck check_certificate(const CertificateNode& root);

struct IncidenceOptions {
  int r = 2;
  int degree = 3;
  int leaf_threshold = 32;
  std::uint64_t seed = 1;
  int max_depth = 24;
};

struct IncidenceResult {
  long long count = 0;
  std::unique_ptr<CertificateNode> tree;
};

IncidenceResult count_rich_points_partitioned(const std::vector<Line>& lines, const IncidenceOptions& opt);

enum class ConfigKind { planar, regulus, pencil, grid, random };
ConfigKind config_kind_from(const std::string& name);
const char* config_kind_name(ConfigKind k);

std::vector<Line> generate_configuration(ConfigKind kind, int L, std::uint64_t seed);

}  // namespace polylab
