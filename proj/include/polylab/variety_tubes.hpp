// Tubes against algebraic surfaces: tangent/transverse classification,
// segment counts, grid cube counts and the tangent direction census.
#pragma once

#include <vector>

#include "polylab/zero_set.hpp"

namespace polylab {

// Finite cylinder around the axis segment center + t dir, |t| <= length / 2.
struct Tube {
  Vec3 center{0, 0, 0};
  Vec3 dir{1, 0, 0};
  double radius = 1.0;
  double length = 1.0;

  static Tube make(const Vec3& center, const Vec3& dir, double radius, double length);
  double axial(const Vec3& x) const { return dot(x - center, dir); }
  double distance(const Vec3& x) const;  // to the axis segment
  bool contains(const Vec3& x, double k = 1.0) const { return distance(x) <= k * radius; }
};

struct Ball {
  Vec3 center{0, 0, 0};
  double radius = 1.0;
};

enum class TubeClass { tangent, transverse, disjoint };
const char* tube_class_name(TubeClass c);

struct TangencyReport {
  TubeClass cls = TubeClass::disjoint;
  Vec3 witness{0, 0, 0};
  double witness_angle = 0;  // transverse: the angle at the witness
  double max_angle = 0;      // largest sampled angle in 10T ∩ 2B
  int wall_samples = 0;      // samples within 2ρ of the axis and within r + ρ of the ball center
  int witness_samples = 0;   // non-singular samples in 10T ∩ 2B
};

struct SampleOptions {
  double spacing = 0;  // 0 selects radius / 2
};

// Throws singular_only when every sample near the tube is singular.
TangencyReport classify_tube(const Tube& tube, const Polynomial& P, const Ball& ball, double angle_threshold,
                             const SampleOptions& opt = {});

struct TubeSegmentation {
  double segment_length = 0;
  std::vector<std::pair<double, double>> segments;  // axial parameter intervals
  int index_of(double t) const;
};
TubeSegmentation segment_tube(const Tube& tube, double a);

struct SegmentCount {
  int occupied = 0;
  int segments = 0;
  int survivors = 0;  // non-singular samples in T with angle >= a
};
SegmentCount transverse_segment_count(const Tube& tube, const Polynomial& Q, double a,
                                      const SampleOptions& opt = {});

struct CubeCountOptions {
  int subsample = 3;  // m lattice points per cube edge
  int jobs = 1;
};
// Unit cubes of the grid [0, R_1] x ... meeting Z(P), detected by sign
// changes or near-zeros on an m^n sub-lattice shared between neighbours.
// Per-cube flags, cube (i, j, l) at (i * R_2 + j) * R_3 + l.
std::vector<char> cubes_meeting_zero_set(const Polynomial& P, const std::vector<int>& dims,
                                         const CubeCountOptions& opt = {});
long long count_cubes_meeting_zero_set(const Polynomial& P, const std::vector<int>& dims,
                                       const CubeCountOptions& opt = {});

struct CensusResult {
  int tangent = 0;
  int transverse = 0;
  int disjoint = 0;
  int census = 0;  // size of the greedy angle-separated subset of tangent tubes
  std::vector<int> selected;
  double bound = 0;  // D^2 log^2(L/ρ) L/ρ
};
CensusResult tangent_direction_census(const std::vector<Tube>& tubes, const Polynomial& P, const Ball& ball,
                                      double rho, double L, double angle_sep, const SampleOptions& opt = {});

// Angle between two directions taken as unoriented lines.
double line_angle(const Vec3& u, const Vec3& v);

}  // namespace polylab
