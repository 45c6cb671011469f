// Sampling of real zero sets by sign-change detection and Newton projection.
#pragma once

#include <vector>

#include "polylab/polynomial.hpp"

namespace polylab {

// Box with orthonormal axes; half[k] = 0 collapses axis k.
struct OrientedBox {
  Vec3 center{0, 0, 0};
  std::array<Vec3, 3> axes{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
  Vec3 half{1, 1, 1};

  static OrientedBox aligned(const Box& b);
  bool contains(const Vec3& x, double slack = 0.0) const;
};

struct ZeroSample {
  Vec3 x;
  double grad_norm;
  bool nonsingular;
};

// Points z with |P(z)| <= 1e-9 * scale, roughly target_spacing apart.
std::vector<ZeroSample> sample_zero_set(const Polynomial& P, const OrientedBox& region, double target_spacing);
std::vector<ZeroSample> sample_zero_set(const Polynomial& P, const Box& region, double target_spacing);

// Newton projection of x onto Z(P); returns false if it does not converge.
bool project_to_zero_set(const Polynomial& P, const std::vector<Polynomial>& grad, Vec3& x, int max_iter = 30);

}  // namespace polylab
