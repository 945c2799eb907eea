#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "driftlab/fields.hpp"
#include "driftlab/mollify.hpp"
#include "driftlab/quadrature.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

namespace {

// Thin adapter over integrate_box keeping the call sites below readable.
class CellIntegrator {
 public:
  using Integrand = std::function<double(const Vec&, double)>;

  CellIntegrator(int d, Integrand fn, std::vector<RefineZone> zones,
                 double min_scale)
      : d_(d), fn_(std::move(fn)), zones_(std::move(zones)),
        min_scale_(min_scale) {}

  double integrate(const Vec& lo, const Vec& hi, int base_cells,
                   int depth_budget) const {
    return integrate_box(d_, fn_, lo, hi, zones_, base_cells, depth_budget,
                         min_scale_);
  }

 private:
  int d_;
  Integrand fn_;
  std::vector<RefineZone> zones_;
  double min_scale_;
};

std::vector<RefineZone> spatial_zones(const DriftField& field,
                                      const TestFunction& phi,
                                      const QuadratureSpec& spec) {
  std::vector<RefineZone> zones;
  for (const auto& p : field.locus().parts) {
    RefineZone z;
    if (p.kind == SingularLocus::Kind::Point) {
      z.center = p.center;
      z.inner = spec.min_scale;
      z.max_depth = spec.max_refine_levels;
    } else if (p.kind == SingularLocus::Kind::Sphere) {
      z.is_sphere = true;
      z.center = p.center;
      z.radius = p.radius;
      z.inner = 1e-3;
      z.max_depth = 6;  // surface cells multiply fast; integrands are log-mild
    } else {
      continue;
    }
    zones.push_back(z);
  }
  if (phi.eta() > 0) {
    RefineZone z;
    z.center = phi.center();
    z.inner = std::max(0.5 * phi.mu() * phi.radius(), spec.min_scale);
    z.max_depth = spec.max_refine_levels;
    zones.push_back(z);
  }
  return zones;
}

// 1-D time nodes (midpoints + weights) over the bump's time support, graded
// toward any time-line singularities of the field.
std::vector<std::pair<double, double>> time_nodes(const DriftField& field,
                                                  const TestFunction& phi,
                                                  int cells) {
  const double a = phi.center_time() - phi.time_radius();
  const double b = phi.center_time() + phi.time_radius();
  std::vector<double> edges;
  for (int i = 0; i <= cells; ++i)
    edges.push_back(a + (b - a) * i / cells);
  for (const auto& p : field.locus().parts) {
    if (p.kind != SingularLocus::Kind::TimeLine) continue;
    for (int k = 1; k <= 20; ++k) {
      const double h = (b - a) * std::pow(0.5, k);
      for (double s : {p.t0 - h, p.t0 + h})
        if (s > a && s < b) edges.push_back(s);
    }
    if (p.t0 > a && p.t0 < b) edges.push_back(p.t0);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<std::pair<double, double>> nodes;
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    nodes.push_back({0.5 * (edges[i] + edges[i + 1]), edges[i + 1] - edges[i]});
  return nodes;
}

struct QuotientParts {
  double field_term = 0;   // int int |b phi|^2
  double g_term = 0;       // int g(t) ||phi(t,.)||_2^2 dt
  double grad_term = 0;    // int int |grad phi|^2
  double value_term = 0;   // int int |phi|^2
};

QuotientParts quotient_parts(const DriftField& field, const TestFunction& phi,
                             const GFunction& g, const QuadratureSpec& spec,
                             int depth_budget, JitterStats* jitter) {
  const int d = field.dim();
  Vec lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    lo[a] = phi.center()[a] - phi.radius();
    hi[a] = phi.center()[a] + phi.radius();
  }
  const auto zones = spatial_zones(field, phi, spec);

  auto eval_b2 = [&](double t, const Vec& x, double half) {
    Vec xx = x;
    if (field.locus().contains(t, xx)) {
      xx[0] += half;  // deterministic half-cell jitter
      if (jitter) {
        ++jitter->count;
        jitter->magnitude = std::max(jitter->magnitude, half);
      }
    }
    Vec b(d);
    field.value(t, xx, b);
    return b.norm2();
  };

  QuotientParts parts;

  // Test-function-only spatial integrals.
  CellIntegrator phi2_int(
      d, [&](const Vec& x, double) {
        const double v = phi.space_factor(x);
        return v * v;
      },
      zones, spec.min_scale);
  const double S_phi2 = phi2_int.integrate(lo, hi, spec.base_cells,
                                           depth_budget);

  CellIntegrator grad_int(
      d, [&](const Vec& x, double) {
        Vec gr(d);
        phi.space_gradient(x, gr);
        return gr.norm2();
      },
      zones, spec.min_scale);
  const double S_grad = grad_int.integrate(lo, hi, spec.base_cells,
                                           depth_budget);

  // Time factors: T2 = int chi^2, plus the Stieltjes integral of chi^2
  // against dG which handles the integrable singularities of g exactly.
  const double ta = phi.center_time() - phi.time_radius();
  const double tb = phi.center_time() + phi.time_radius();
  double T2 = 0, gT = 0;
  {
    const int n = 256;
    double Gprev = g.G(std::max(ta, 0.0));
    for (int i = 0; i < n; ++i) {
      const double l = ta + (tb - ta) * i / n;
      const double r = ta + (tb - ta) * (i + 1) / n;
      const double mid = 0.5 * (l + r);
      const double chi2 = phi.time_factor(mid) * phi.time_factor(mid);
      T2 += chi2 * (r - l);
      const double Gr = g.G(std::max(r, 0.0));
      gT += chi2 * (Gr - Gprev);
      Gprev = Gr;
    }
  }

  const auto* mol = dynamic_cast<const MollifiedField*>(&field);
  if (mol && mol->has_static_core()) {
    // The field factorizes as time_weight(t) * spatial_base(x); both the
    // spatial quadrature and the window integral are exact to quadrature.
    CellIntegrator b_int(
        d,
        [&](const Vec& x, double) {
          const double v = phi.space_factor(x);
          if (v == 0.0) return 0.0;
          Vec bv(d);
          mol->spatial_base(x, bv);
          return bv.norm2() * v * v;
        },
        zones, spec.min_scale);
    const double S_b = b_int.integrate(lo, hi, spec.base_cells, depth_budget);
    double wT = 0;
    const int nt = 256;
    for (int i = 0; i < nt; ++i) {
      const double t = ta + (tb - ta) * (i + 0.5) / nt;
      const double chi = phi.time_factor(t);
      const double wgt = mol->time_weight(t);
      wT += wgt * wgt * chi * chi * (tb - ta) / nt;
    }
    parts.field_term = wT * S_b;
  } else if (!field.time_dependent()) {
    CellIntegrator b_int(
        d,
        [&](const Vec& x, double half) {
          const double v = phi.space_factor(x);
          if (v == 0.0) return 0.0;
          return eval_b2(phi.center_time(), x, half) * v * v;
        },
        zones, spec.min_scale);
    parts.field_term =
        T2 * b_int.integrate(lo, hi, spec.base_cells, depth_budget);
  } else {
    double acc = 0;
    for (const auto& [t, w] : time_nodes(field, phi, spec.time_cells)) {
      const double chi = phi.time_factor(t);
      if (chi == 0.0) continue;
      CellIntegrator b_int(
          d,
          [&](const Vec& x, double half) {
            const double v = phi.space_factor(x);
            if (v == 0.0) return 0.0;
            return eval_b2(t, x, half) * v * v;
          },
          zones, spec.min_scale);
      acc += chi * chi * w *
             b_int.integrate(lo, hi, spec.base_cells, depth_budget);
    }
    parts.field_term = acc;
  }

  parts.g_term = gT * S_phi2;
  parts.grad_term = T2 * S_grad;
  parts.value_term = T2 * S_phi2;
  return parts;
}

}  // namespace

double rayleigh_quotient(const DriftField& field, const TestFunction& phi,
                         const GFunction& g, const QuadratureSpec& spec,
                         JitterStats* jitter) {
  if (phi.dim() != field.dim())
    throw DimensionMismatch("test function dimension does not match field");

  // Dyadic refinement until the quotient moves by < rel_tol between levels.
  double prev = std::numeric_limits<double>::quiet_NaN();
  double result = 0;
  for (int depth = 6; depth <= spec.max_refine_levels; depth += 2) {
    const auto parts = quotient_parts(field, phi, g, spec, depth, jitter);
    if (parts.grad_term < 1e-12 * parts.value_term || parts.grad_term <= 0)
      throw DegenerateTest("test function has negligible gradient energy");
    result = (parts.field_term - parts.g_term) / parts.grad_term;
    if (std::isfinite(prev) &&
        std::abs(result - prev) <=
            spec.rel_tol * std::max({std::abs(result), std::abs(prev), 1e-12}))
      break;
    prev = result;
  }
  return result;
}

double estimate_form_bound(const DriftField& field,
                           const TestFunctionFamily& family, int budget,
                           const QuadratureSpec& spec) {
  if (budget < 1) throw InvalidParameter("estimate_form_bound needs budget >= 1");
  const GFunction g = field.certificate() ? field.certificate()->g
                                          : GFunction::zero();
  double best = -std::numeric_limits<double>::infinity();
  int degenerate = 0;
  for (int i = 0; i < budget; ++i) {
    try {
      best = std::max(best, rayleigh_quotient(field, family.draw(i), g, spec));
    } catch (const DegenerateTest&) {
      ++degenerate;
    }
  }
  if (degenerate == budget)
    throw DegenerateTest("all test candidates degenerated");
  return best;
}

std::pair<Vec, double> CubeSampler::draw(int i,
                                         const SingularLocus& locus) const {
  // First draws: dyadic cubes centered on spatial locus anchors.
  int anchor_count = 0;
  for (const auto& p : locus.parts)
    if (p.kind != SingularLocus::Kind::TimeLine) ++anchor_count;
  if (anchor_count > 0 && i < 6) {
    const auto& p = locus.parts[static_cast<size_t>(i) % anchor_count];
    Vec c = p.center;
    if (p.kind == SingularLocus::Kind::Sphere) c[0] += p.radius;
    const double side =
        std::max(min_side, max_side * std::pow(0.5, i / anchor_count));
    return {c, side};
  }
  NormalStream s(seed, static_cast<std::uint64_t>(i));
  Vec c = (domain_center.d == d) ? domain_center : Vec::zero(d);
  for (int a = 0; a < d; ++a)
    c[a] += domain_halfwidth * (2.0 * s.next_uniform() - 1.0);
  const double side =
      min_side * std::pow(max_side / min_side, s.next_uniform());
  return {c, side};
}

double morrey_seminorm(const DriftField& field, double s,
                       const CubeSampler& sampler, int n_cubes,
                       const QuadratureSpec& spec) {
  if (s <= 1) throw InvalidParameter("morrey_seminorm needs s > 1");
  if (n_cubes < 1) throw InvalidParameter("morrey_seminorm needs n_cubes >= 1");
  const int d = field.dim();

  std::vector<RefineZone> zones;
  for (const auto& p : field.locus().parts) {
    if (p.kind == SingularLocus::Kind::TimeLine) continue;
    RefineZone z;
    z.is_sphere = p.kind == SingularLocus::Kind::Sphere;
    z.center = p.center;
    z.radius = p.radius;
    z.inner = z.is_sphere ? 1e-3 : spec.min_scale;
    z.max_depth = z.is_sphere ? 6 : spec.max_refine_levels;
    zones.push_back(z);
  }

  double best = 0;
  for (int i = 0; i < n_cubes; ++i) {
    const auto [center, side] = sampler.draw(i, field.locus());
    Vec lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      lo[a] = center[a] - 0.5 * side;
      hi[a] = center[a] + 0.5 * side;
    }
    CellIntegrator integ(
        d,
        [&](const Vec& x, double half) {
          Vec xx = x;
          if (field.locus().contains(0.0, xx)) xx[0] += half;
          Vec b(d);
          field.value(0.0, xx, b);
          return std::pow(b.norm2(), s);
        },
        zones, spec.min_scale);
    const double mass = integ.integrate(lo, hi, std::min(spec.base_cells, 12),
                                        std::min(spec.max_refine_levels, 10));
    const double avg = mass / std::pow(side, d);
    best = std::max(best, side * side * std::pow(avg, 1.0 / s));
  }
  return best;
}

}  // namespace driftlab
