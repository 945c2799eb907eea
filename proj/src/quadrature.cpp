#include "driftlab/quadrature.hpp"

#include <algorithm>

namespace driftlab {

namespace {

struct Recursor {
  int d;
  const std::function<double(const Vec&, double)>& fn;
  const std::vector<RefineZone>& zones;
  double min_scale;
  int depth_budget;

  bool needs_split(const Vec& c, double half, int depth) const {
    if (2.0 * half <= min_scale) return false;
    const double diag = 2.0 * half * std::sqrt(static_cast<double>(d));
    for (const auto& z : zones) {
      if (depth >= std::min(z.max_depth, depth_budget)) continue;
      const double dist = std::max(0.0, z.distance(c) - 0.5 * diag);
      if (diag > std::max(dist, z.inner)) return true;
    }
    return false;
  }

  double cell(const Vec& c, double half, int depth) const {
    if (needs_split(c, half, depth)) {
      double sum = 0;
      const int corners = 1 << d;
      Vec cc(d);
      for (int k = 0; k < corners; ++k) {
        for (int a = 0; a < d; ++a)
          cc[a] = c[a] + ((k >> a) & 1 ? 0.5 : -0.5) * half;
        sum += cell(cc, 0.5 * half, depth + 1);
      }
      return sum;
    }
    return fn(c, half) * std::pow(2.0 * half, d);
  }
};

}  // namespace

double integrate_box(int d,
                     const std::function<double(const Vec&, double)>& fn,
                     const Vec& lo, const Vec& hi,
                     const std::vector<RefineZone>& zones, int base_cells,
                     int depth_budget, double min_scale) {
  Recursor rec{d, fn, zones, min_scale, depth_budget};
  double total = 0;
  Vec h(d), c(d);
  for (int a = 0; a < d; ++a) h[a] = (hi[a] - lo[a]) / base_cells;
  std::vector<int> idx(d, 0);
  long ncells = 1;
  for (int a = 0; a < d; ++a) ncells *= base_cells;
  for (long cellidx = 0; cellidx < ncells; ++cellidx) {
    long rem = cellidx;
    for (int a = 0; a < d; ++a) {
      idx[a] = static_cast<int>(rem % base_cells);
      rem /= base_cells;
    }
    for (int a = 0; a < d; ++a) c[a] = lo[a] + (idx[a] + 0.5) * h[a];
    total += rec.cell(c, 0.5 * h[0], 0);
  }
  return total;
}

std::vector<RefineZone> field_refine_zones(const DriftField& field,
                                           double point_inner, int point_depth,
                                           double sphere_inner,
                                           int sphere_depth) {
  std::vector<RefineZone> zones;
  for (const auto& p : field.locus().parts) {
    RefineZone z;
    if (p.kind == SingularLocus::Kind::Point) {
      z.center = p.center;
      z.inner = point_inner;
      z.max_depth = point_depth;
    } else if (p.kind == SingularLocus::Kind::Sphere) {
      z.is_sphere = true;
      z.center = p.center;
      z.radius = p.radius;
      z.inner = sphere_inner;
      z.max_depth = sphere_depth;
    } else {
      continue;
    }
    zones.push_back(z);
  }
  return zones;
}

}  // namespace driftlab
