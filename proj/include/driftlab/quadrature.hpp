#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "driftlab/fields.hpp"

namespace driftlab {

/// A region toward which quadrature cells are dyadically subdivided: a point
/// with an inner resolution scale, or a sphere surface.
struct RefineZone {
  bool is_sphere = false;
  Vec center;
  double radius = 0;
  double inner = 0;
  int max_depth = 12;

  double distance(const Vec& x) const {
    const double d = (x - center).norm();
    return is_sphere ? std::abs(d - radius) : d;
  }
};

/// Tensor-midpoint integration over [lo, hi]^d with recursive dyadic
/// subdivision toward the refine zones.  The integrand receives the cell
/// half-width for jitter decisions.  Midpoint cells keep sample points off
/// measure-zero loci in generic position.
double integrate_box(int d,
                     const std::function<double(const Vec&, double)>& fn,
                     const Vec& lo, const Vec& hi,
                     const std::vector<RefineZone>& zones, int base_cells,
                     int depth_budget, double min_scale);

/// Refine zones matching a field's spatial singular parts.
std::vector<RefineZone> field_refine_zones(const DriftField& field,
                                           double point_inner, int point_depth,
                                           double sphere_inner = 1e-3,
                                           int sphere_depth = 6);

}  // namespace driftlab
