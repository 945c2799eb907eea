#include "driftlab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "driftlab/lattice.hpp"

namespace driftlab {

double Weight::tail_fraction(double L, int d) const {
  // Radial quadrature of rho r^{d-1} inside/outside L (to 8L as proxy for
  // infinity plus the power-law remainder).
  auto rho_r = [&](double r) {
    return std::pow(1.0 + kappa * r * r, -theta) * std::pow(r, d - 1);
  };
  auto integrate = [&](double a, double b, int n) {
    double acc = 0;
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) acc += rho_r(a + (i + 0.5) * h) * h;
    return acc;
  };
  const double inside = integrate(0, L, 4096);
  double outside = integrate(L, 8 * L, 8192);
  // remainder beyond 8L: rho ~ (kappa r^2)^{-theta}
  const double R = 8 * L;
  const double expo = d - 2 * theta;
  if (expo < 0)
    outside += std::pow(kappa, -theta) * std::pow(R, expo) / (-expo);
  return outside / (inside + outside);
}

void SpaceTimeGrid::validate(int d) const {
  if (n < 8) throw InvalidParameter("grid needs n >= 8");
  if (T <= s) throw InvalidParameter("grid needs T > s");
  if (steps < 1) throw InvalidParameter("grid needs steps >= 1");
  const double bound = hx() * hx() / (2.0 * d) * cfl_safety;
  if (ht() > bound)
    throw StabilityViolation("h_t exceeds the advection-splitting bound");
}

void SpaceTimeGrid::validate_weight(const Weight& w, int d) const {
  Vec corner(3);
  corner[0] = L;
  if (w.rho(corner) > 1e-3)
    throw InvalidParameter("weight does not decay enough at the boundary");
  if (w.tail_fraction(L, d) > 0.01)
    throw InvalidParameter("weight tail beyond the box exceeds 1%");
}

// ---------------------------------------------------------------------------
// GridSolution
// ---------------------------------------------------------------------------

double GridSolution::interp(int k, const Vec& x) const {
  const int n = grid_.n;
  const double h = grid_.hx();
  double s[3];
  int i0[3];
  double w[3];
  for (int a = 0; a < 3; ++a) {
    s[a] = (x[a] + grid_.L) / h;
    if (s[a] < 0 || s[a] > n - 1) return 0.0;
    double fl = std::floor(s[a]);
    if (fl > n - 2) fl = n - 2;
    i0[a] = static_cast<int>(fl);
    w[a] = s[a] - fl;
  }
  const double* lv = level(k);
  double acc = 0;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const double wc = (dx ? w[0] : 1 - w[0]) * (dy ? w[1] : 1 - w[1]) *
                      (dz ? w[2] : 1 - w[2]);
    acc += wc *
           lv[(static_cast<std::size_t>(i0[2] + dz) * n + (i0[1] + dy)) * n +
              (i0[0] + dx)];
  }
  return acc;
}

double GridSolution::sup_norm(int k) const {
  const double* lv = level(k);
  double best = 0;
  const std::size_t nn = nodes();
  for (std::size_t i = 0; i < nn; ++i) best = std::max(best, std::abs(lv[i]));
  return best;
}

double GridSolution::lp_norm(int k, double p, const Weight* w) const {
  const int n = grid_.n;
  const double h = grid_.hx();
  const double cell = h * h * h;
  const double* lv = level(k);
  double acc = 0;
  Vec x(3);
  for (int iz = 1; iz < n - 1; ++iz) {
    x[2] = grid_.node(iz);
    for (int iy = 1; iy < n - 1; ++iy) {
      x[1] = grid_.node(iy);
      std::size_t base = (static_cast<std::size_t>(iz) * n + iy) * n;
      for (int ix = 1; ix < n - 1; ++ix) {
        const double v = std::abs(lv[base + ix]);
        if (v == 0) continue;
        double term = std::pow(v, p);
        if (w) {
          x[0] = grid_.node(ix);
          term *= w->rho(x);
        }
        acc += term;
      }
    }
  }
  return std::pow(acc * cell, 1.0 / p);
}

void GridSolution::export_block(std::ostream& os) const {
  BlockHeader h;
  h.rank = 4;
  h.ncomp = 1;
  h.dims = {static_cast<std::uint64_t>(levels()),
            static_cast<std::uint64_t>(grid_.n),
            static_cast<std::uint64_t>(grid_.n),
            static_cast<std::uint64_t>(grid_.n)};
  h.origin = {times_.empty() ? grid_.s : times_.front(), -grid_.L, -grid_.L,
              -grid_.L};
  h.spacing = {levels() > 1 ? times_[1] - times_[0] : grid_.ht(), grid_.hx(),
               grid_.hx(), grid_.hx()};
  write_block(os, h, data_);
}

// ---------------------------------------------------------------------------
// Solver core
// ---------------------------------------------------------------------------

namespace {

struct Thomas {
  // Prefactorized constant-coefficient tridiagonal (1 + 2r) on the diagonal,
  // -r off-diagonal, Dirichlet ends eliminated.
  std::vector<double> cp;   // modified upper coefficients
  std::vector<double> inv;  // 1 / (b - a c'_{i-1})
  double r = 0;

  void init(int m, double r_) {
    r = r_;
    cp.assign(m, 0.0);
    inv.assign(m, 0.0);
    double prev_cp = 0;
    for (int i = 0; i < m; ++i) {
      const double denom = 1.0 + 2.0 * r + r * prev_cp;
      inv[i] = 1.0 / denom;
      cp[i] = -r * inv[i];
      prev_cp = cp[i];
    }
  }

  // Solve in place for one line of m interior values.
  void solve(double* d) const {
    const int m = static_cast<int>(cp.size());
    d[0] *= inv[0];
    for (int i = 1; i < m; ++i) d[i] = (d[i] + r * d[i - 1]) * inv[i];
    for (int i = m - 2; i >= 0; --i) d[i] -= cp[i] * d[i + 1];
  }
};

using TimeMap = std::function<double(double)>;

struct DriftSampler {
  const DriftField* field = nullptr;
  const MollifiedField* mollified = nullptr;
  TimeMap tmap;
  bool static_core = false;
  std::vector<double> bx, by, bz;  // per-node components (static: unscaled)
  double base_max = 0;             // max |b| over nodes for the static core

  void init(const DriftField* b, const TimeMap& map, const SpaceTimeGrid& g) {
    field = b;
    tmap = map;
    if (!b) return;
    if (!b->bounded_smooth())
      throw RejectedSingularField(
          "solver accepts only bounded (mollified) drifts");
    const std::size_t nn = static_cast<std::size_t>(g.n) * g.n * g.n;
    bx.assign(nn, 0.0);
    by.assign(nn, 0.0);
    bz.assign(nn, 0.0);
    mollified = dynamic_cast<const MollifiedField*>(b);
    static_core = mollified && mollified->has_static_core();
    if (static_core) {
      const auto& lat = mollified->spatial_lattice();
      Vec x(3), v(3);
      double out[8];
      std::size_t i = 0;
      for (int iz = 0; iz < g.n; ++iz) {
        x[2] = g.node(iz);
        for (int iy = 0; iy < g.n; ++iy) {
          x[1] = g.node(iy);
          for (int ix = 0; ix < g.n; ++ix, ++i) {
            x[0] = g.node(ix);
            if (lat.inside(x)) {
              lat.interp(x, out);
            } else {
              mollified->spatial_base(x, v);
              out[0] = v[0];
              out[1] = v[1];
              out[2] = v[2];
            }
            bx[i] = out[0];
            by[i] = out[1];
            bz[i] = out[2];
            const double m =
                std::sqrt(out[0] * out[0] + out[1] * out[1] + out[2] * out[2]);
            base_max = std::max(base_max, m);
          }
        }
      }
    }
  }

  // Fill arrays for solver time t; returns max |b| at this level.
  double sample(double t, const SpaceTimeGrid& g) {
    if (!field) return 0;
    const double ft = tmap ? tmap(t) : t;
    if (static_core) {
      scale_ = mollified->time_weight(ft);
      return base_max * std::abs(scale_);
    }
    double mx = 0;
    Vec x(3), v(3);
    std::size_t i = 0;
    for (int iz = 0; iz < g.n; ++iz) {
      x[2] = g.node(iz);
      for (int iy = 0; iy < g.n; ++iy) {
        x[1] = g.node(iy);
        for (int ix = 0; ix < g.n; ++ix, ++i) {
          x[0] = g.node(ix);
          field->value(ft, x, v);
          bx[i] = v[0];
          by[i] = v[1];
          bz[i] = v[2];
          mx = std::max(mx, v.norm());
        }
      }
    }
    scale_ = 1.0;
    return mx;
  }

  double scale() const { return scale_; }

 private:
  double scale_ = 1.0;
};

struct SourceSampler {
  const SourceTerm* src = nullptr;
  TimeMap tmap;
  long jitter = 0;

  double eval(double t, const Vec& x, double half_cell) {
    if (!src || src->empty()) return 0;
    const double ft = tmap ? tmap(t) : t;
    double mag = 1.0;
    if (src->f_mag) {
      Vec xx = x;
      if (src->f_mag->locus().contains(ft, xx)) {
        xx[0] += half_cell;
        ++jitter;
      }
      mag = src->f_mag->magnitude(ft, xx);
    }
    return mag * (src->h ? src->h(ft, x) : 1.0);
  }
};

}  // namespace

// Private-access shim for the stepping core.
class SolveAccess {
 public:
  static GridSolution run(const DriftField* b, const TimeMap& tmap,
                          const SpatialFn& f0, const SourceTerm& src,
                          const SpaceTimeGrid& grid, const SolveOptions& opts);
};

GridSolution solve_forward_cauchy(const DriftField* b, const SpatialFn& f0,
                                  const SourceTerm& src,
                                  const SpaceTimeGrid& grid,
                                  const SolveOptions& opts) {
  return SolveAccess::run(b, TimeMap{}, f0, src, grid, opts);
}

GridSolution SolveAccess::run(const DriftField* b, const TimeMap& tmap,
                              const SpatialFn& f0, const SourceTerm& src,
                              const SpaceTimeGrid& grid,
                              const SolveOptions& opts) {
  grid.validate();
  if (b && b->dim() != 3)
    throw DimensionMismatch("solver is implemented for d = 3");

  const int n = grid.n;
  const std::size_t nn = static_cast<std::size_t>(n) * n * n;
  const double h = grid.hx();
  const double ht = grid.ht();

  GridSolution sol;
  sol.grid_ = grid;
  if (b && b->certificate()) {
    sol.drift_delta_ = b->certificate()->delta;
    sol.drift_g_zero_ = b->certificate()->g.is_zero();
    sol.drift_g_ = b->certificate()->g;
  }

  DriftSampler drift;
  drift.init(b, tmap, grid);
  SourceSampler source;
  source.src = &src;
  source.tmap = tmap;

  std::vector<double> u(nn, 0.0), ustar(nn, 0.0);

  // initial data (boundary forced to 0)
  {
    Vec x(3);
    std::size_t i = 0;
    for (int iz = 0; iz < n; ++iz) {
      x[2] = grid.node(iz);
      for (int iy = 0; iy < n; ++iy) {
        x[1] = grid.node(iy);
        for (int ix = 0; ix < n; ++ix, ++i) {
          x[0] = grid.node(ix);
          const bool bd = ix == 0 || iy == 0 || iz == 0 || ix == n - 1 ||
                          iy == n - 1 || iz == n - 1;
          u[i] = bd ? 0.0 : f0(x);
        }
      }
    }
  }

  Thomas th;
  th.init(n - 2, ht / (h * h));

  const int stride = opts.final_only ? grid.steps + 1
                                     : std::max(1, opts.store_stride);
  auto store = [&](int k) {
    if (opts.final_only && k != grid.steps && k != 0) return false;
    return k % stride == 0 || k == grid.steps;
  };
  auto record = [&](int k) {
    if (!store(k)) return;
    sol.times_.push_back(grid.s + k * ht);
    sol.data_.insert(sol.data_.end(), u.begin(), u.end());
  };

  double f_sup = 0;
  for (std::size_t i = 0; i < nn; ++i) f_sup = std::max(f_sup, std::abs(u[i]));

  auto leak_scan = [&]() {
    // first interior layer
    double mx = 0;
    const int lo = 1, hi = n - 2;
    for (int iz = lo; iz <= hi; ++iz)
      for (int iy = lo; iy <= hi; ++iy)
        for (int ix = lo; ix <= hi; ++ix) {
          if (ix != lo && ix != hi && iy != lo && iy != hi && iz != lo &&
              iz != hi)
            continue;
          mx = std::max(
              mx, std::abs(u[(static_cast<std::size_t>(iz) * n + iy) * n + ix]));
        }
    return mx;
  };

  sol.sup_history_.push_back(f_sup);
  record(0);

  const std::size_t sx = 1, sy = n, sz = static_cast<std::size_t>(n) * n;

  std::vector<double> line(n - 2);

  for (int k = 0; k < grid.steps; ++k) {
    const double t = grid.s + k * ht;
    const double bmax = drift.sample(t, grid);
    if (bmax * ht / h > 0.5)
      throw StabilityViolation("advection CFL number exceeds 0.5");
    const double sc = drift.scale();

    // explicit upwind advection + source
    const bool have_drift = b != nullptr;
    const bool have_src = !src.empty();
    for (int iz = 1; iz < n - 1; ++iz) {
      for (int iy = 1; iy < n - 1; ++iy) {
        std::size_t i = (static_cast<std::size_t>(iz) * n + iy) * n + 1;
        for (int ix = 1; ix < n - 1; ++ix, ++i) {
          double val = u[i];
          if (have_drift) {
            const double wx = sc * drift.bx[i];
            const double wy = sc * drift.by[i];
            const double wz = sc * drift.bz[i];
            double adv = 0;
            adv += wx > 0 ? wx * (u[i] - u[i - sx]) : wx * (u[i + sx] - u[i]);
            adv += wy > 0 ? wy * (u[i] - u[i - sy]) : wy * (u[i + sy] - u[i]);
            adv += wz > 0 ? wz * (u[i] - u[i - sz]) : wz * (u[i + sz] - u[i]);
            val -= ht / h * adv;
          }
          if (have_src) {
            Vec x(3);
            x[0] = grid.node(ix);
            x[1] = grid.node(iy);
            x[2] = grid.node(iz);
            val += ht * source.eval(t, x, 0.5 * h);
          }
          ustar[i] = val;
        }
      }
    }
    // boundary stays zero
    std::swap(u, ustar);

    // implicit diffusion, dimension split: x, then y, then z lines
    for (int iz = 1; iz < n - 1; ++iz)
      for (int iy = 1; iy < n - 1; ++iy) {
        double* base = u.data() + (static_cast<std::size_t>(iz) * n + iy) * n;
        th.solve(base + 1);
      }
    for (int iz = 1; iz < n - 1; ++iz)
      for (int ix = 1; ix < n - 1; ++ix) {
        std::size_t i0 = static_cast<std::size_t>(iz) * sz + ix;
        for (int iy = 1; iy < n - 1; ++iy) line[iy - 1] = u[i0 + iy * sy];
        th.solve(line.data());
        for (int iy = 1; iy < n - 1; ++iy) u[i0 + iy * sy] = line[iy - 1];
      }
    for (int iy = 1; iy < n - 1; ++iy)
      for (int ix = 1; ix < n - 1; ++ix) {
        std::size_t i0 = static_cast<std::size_t>(iy) * sy + ix;
        for (int iz = 1; iz < n - 1; ++iz) line[iz - 1] = u[i0 + iz * sz];
        th.solve(line.data());
        for (int iz = 1; iz < n - 1; ++iz) u[i0 + iz * sz] = line[iz - 1];
      }

    double sup = 0;
    for (std::size_t i = 0; i < nn; ++i) sup = std::max(sup, std::abs(u[i]));
    sol.sup_history_.push_back(sup);
    sol.boundary_leak_ = std::max(sol.boundary_leak_, leak_scan());
    record(k + 1);
  }

  // clear boundary rows in storage (they are zero by construction)
  sol.source_jitter_ = source.jitter;
  return sol;
}

GridSolution solve_backward_terminal(const DriftField* b, const SpatialFn& f0,
                                     const SourceTerm& src,
                                     const SpaceTimeGrid& grid, double r,
                                     const SolveOptions& opts) {
  // w(t) = v(r - t) where v solves the forward problem with the drift and
  // source read at the reflected time.
  SpaceTimeGrid g = grid;
  g.s = 0.0;
  g.T = r - grid.s;
  const double offset = r;
  return SolveAccess::run(b, [offset](double tau) { return offset - tau; },
                          f0, src, g, opts);
}

// ---------------------------------------------------------------------------
// Monitors
// ---------------------------------------------------------------------------

namespace {

// centered-difference gradient magnitude field of one stored level
void gradient_field(const GridSolution& v, int k, std::vector<double>& gx,
                    std::vector<double>& gy, std::vector<double>& gz) {
  const int n = v.n();
  const double inv2h = 1.0 / (2.0 * v.grid().hx());
  const std::size_t nn = v.nodes();
  gx.assign(nn, 0.0);
  gy.assign(nn, 0.0);
  gz.assign(nn, 0.0);
  const double* lv = v.level(k);
  const std::size_t sy = n, sz = static_cast<std::size_t>(n) * n;
  for (int iz = 1; iz < n - 1; ++iz)
    for (int iy = 1; iy < n - 1; ++iy) {
      std::size_t i = (static_cast<std::size_t>(iz) * n + iy) * n + 1;
      for (int ix = 1; ix < n - 1; ++ix, ++i) {
        gx[i] = (lv[i + 1] - lv[i - 1]) * inv2h;
        gy[i] = (lv[i + sy] - lv[i - sy]) * inv2h;
        gz[i] = (lv[i + sz] - lv[i - sz]) * inv2h;
      }
    }
}

double weighted_sum_pow(const GridSolution& v, const std::vector<double>& mag,
                        double p, const Weight& w) {
  const int n = v.n();
  const double cell = std::pow(v.grid().hx(), 3);
  double acc = 0;
  Vec x(3);
  for (int iz = 1; iz < n - 1; ++iz) {
    x[2] = v.grid().node(iz);
    for (int iy = 1; iy < n - 1; ++iy) {
      x[1] = v.grid().node(iy);
      std::size_t i = (static_cast<std::size_t>(iz) * n + iy) * n + 1;
      for (int ix = 1; ix < n - 1; ++ix, ++i) {
        const double m = mag[i];
        if (m == 0) continue;
        x[0] = v.grid().node(ix);
        acc += std::pow(m, p) * w.rho(x);
      }
    }
  }
  return acc * cell;
}

}  // namespace

EnergyReport energy_report(const GridSolution& v, double q, const Weight& w,
                           const SourceTerm& src, const SpatialFn& f0) {
  if (!q_admissible(3, v.drift_delta(), q))
    throw QOutOfRange("q outside ]d, delta^{-1/2}[ for the drift certificate");
  EnergyReport rep;
  rep.q = q;
  rep.kappa = w.kappa;
  rep.theta = w.theta;

  const int n = v.n();
  const std::size_t nn = v.nodes();
  const double cell = std::pow(v.grid().hx(), 3);
  const double dt = v.levels() > 1 ? v.time(1) - v.time(0) : v.grid().ht();

  std::vector<double> gx, gy, gz, mag(nn), pw(nn);
  std::vector<double> pgx, pgy, pgz;

  for (int k = 0; k < v.levels(); ++k) {
    // ||v||^q and ||grad v||^q at this level
    std::vector<double> vals(nn);
    const double* lv = v.level(k);
    for (std::size_t i = 0; i < nn; ++i) vals[i] = std::abs(lv[i]);
    rep.lhs_v = std::max(rep.lhs_v, weighted_sum_pow(v, vals, q, w));

    gradient_field(v, k, gx, gy, gz);
    for (std::size_t i = 0; i < nn; ++i)
      mag[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]);
    rep.lhs_grad = std::max(rep.lhs_grad, weighted_sum_pow(v, mag, q, w));

    // grad |grad v|^{q/2}: centered differences of the floored power field
    for (std::size_t i = 0; i < nn; ++i)
      pw[i] = std::pow(std::max(mag[i], 1e-30), 0.5 * q);
    const double inv2h = 1.0 / (2.0 * v.grid().hx());
    const std::size_t sy = n, sz = static_cast<std::size_t>(n) * n;
    double acc = 0;
    Vec x(3);
    for (int iz = 2; iz < n - 2; ++iz) {
      x[2] = v.grid().node(iz);
      for (int iy = 2; iy < n - 2; ++iy) {
        x[1] = v.grid().node(iy);
        std::size_t i = (static_cast<std::size_t>(iz) * n + iy) * n + 2;
        for (int ix = 2; ix < n - 2; ++ix, ++i) {
          const double dx = (pw[i + 1] - pw[i - 1]) * inv2h;
          const double dy = (pw[i + sy] - pw[i - sy]) * inv2h;
          const double dz = (pw[i + sz] - pw[i - sz]) * inv2h;
          x[0] = v.grid().node(ix);
          acc += (dx * dx + dy * dy + dz * dz) * w.rho(x);
        }
      }
    }
    rep.lhs_grad_pow += acc * cell * (k > 0 ? dt : 0.0);

    // RHS source accumulation
    if (!src.empty()) {
      double sacc = 0;
      Vec xs(3);
      const double t = v.time(k);
      for (int iz = 1; iz < n - 1; ++iz) {
        xs[2] = v.grid().node(iz);
        for (int iy = 1; iy < n - 1; ++iy) {
          xs[1] = v.grid().node(iy);
          for (int ix = 1; ix < n - 1; ++ix) {
            xs[0] = v.grid().node(ix);
            double m = 1.0;
            if (src.f_mag) {
              Vec xx = xs;
              if (src.f_mag->locus().contains(t, xx)) {
                xx[0] += 0.5 * v.grid().hx();
                ++rep.jitter_count;
              }
              m = src.f_mag->magnitude(t, xx);
            }
            const double hval = src.h ? std::abs(src.h(t, xs)) : 1.0;
            const double term = m * std::pow(hval, 0.5 * q);
            if (term != 0) sacc += term * term * w.rho(xs);
          }
        }
      }
      rep.rhs_source += sacc * cell * (k > 0 ? dt : 0.0);
    }
  }

  // RHS initial-data terms
  {
    std::vector<double> f(nn, 0.0);
    Vec x(3);
    std::size_t i = 0;
    for (int iz = 0; iz < n; ++iz) {
      x[2] = v.grid().node(iz);
      for (int iy = 0; iy < n; ++iy) {
        x[1] = v.grid().node(iy);
        for (int ix = 0; ix < n; ++ix, ++i) {
          x[0] = v.grid().node(ix);
          f[i] = f0(x);
        }
      }
    }
    std::vector<double> af(nn);
    for (std::size_t j = 0; j < nn; ++j) af[j] = std::abs(f[j]);
    rep.rhs_f = weighted_sum_pow(v, af, q, w);
    const double inv2h = 1.0 / (2.0 * v.grid().hx());
    const std::size_t sy = n, sz = static_cast<std::size_t>(n) * n;
    std::vector<double> gmag(nn, 0.0);
    for (int iz = 1; iz < n - 1; ++iz)
      for (int iy = 1; iy < n - 1; ++iy) {
        std::size_t j = (static_cast<std::size_t>(iz) * n + iy) * n + 1;
        for (int ix = 1; ix < n - 1; ++ix, ++j) {
          const double dx = (f[j + 1] - f[j - 1]) * inv2h;
          const double dy = (f[j + sy] - f[j - sy]) * inv2h;
          const double dz = (f[j + sz] - f[j - sz]) * inv2h;
          gmag[j] = std::sqrt(dx * dx + dy * dy + dz * dz);
        }
      }
    rep.rhs_grad_f = weighted_sum_pow(v, gmag, q, w);
  }

  rep.lhs_total = rep.lhs_v + rep.lhs_grad + rep.lhs_grad_pow;
  rep.rhs_total = rep.rhs_source + rep.rhs_grad_f + rep.rhs_f;
  rep.ratio = rep.rhs_total > 0
                  ? rep.lhs_total / rep.rhs_total
                  : std::numeric_limits<double>::infinity();
  return rep;
}

FellerReport feller_convergence(
    const std::vector<std::pair<MollifiedPtr, MollifierSchedule>>& schedule,
    const SpatialFn& f0, const SpaceTimeGrid& grid) {
  if (schedule.size() < 3)
    throw InvalidParameter("feller_convergence needs at least 3 levels");
  FellerReport rep;
  SolveOptions opts;
  opts.final_only = true;
  std::vector<double> prev;
  for (const auto& [bm, sched] : schedule) {
    rep.levels.push_back(sched.m);
    GridSolution sol =
        solve_forward_cauchy(bm.get(), f0, SourceTerm{}, grid, opts);
    rep.f_sup = std::max(rep.f_sup, sol.sup_history().front());
    for (std::size_t k = 1; k < sol.sup_history().size(); ++k)
      if (sol.sup_history()[k] >
          sol.sup_history()[k - 1] + 1e-10 * std::max(1.0, rep.f_sup))
        rep.max_principle_ok = false;
    const int last = sol.levels() - 1;
    std::vector<double> fin(sol.level(last), sol.level(last) + sol.nodes());
    if (!prev.empty()) {
      double gap = 0;
      for (std::size_t i = 0; i < fin.size(); ++i)
        gap = std::max(gap, std::abs(fin[i] - prev[i]));
      rep.gaps.push_back(gap);
    }
    prev = std::move(fin);
  }
  return rep;
}

ContractionReport lp_contraction_check(const GridSolution& v, double p,
                                       const FormBoundCertificate& cert,
                                       double slack) {
  if (cert.delta >= 4)
    throw POutOfRange("contraction requires delta < 4");
  if (cert.delta > 0 && p <= contraction_p_lower(cert.delta))
    throw POutOfRange("p outside the quasi-contraction interval");
  if (p < 1) throw POutOfRange("p must be >= 1");
  ContractionReport rep;
  rep.p = p;
  const double sd = std::sqrt(cert.delta);
  for (int k = 0; k < v.levels(); ++k) {
    double factor = 1.0;
    if (cert.delta > 0 && !cert.g.is_zero()) {
      const double G = cert.g.G(v.time(k)) - cert.g.G(v.time(0));
      factor = std::exp(-G / (p * sd));
    }
    const double norm = v.lp_norm(k, p) * factor;
    if (k == 0)
      rep.rhs = v.lp_norm(0, p);
    rep.lhs = std::max(rep.lhs, norm);
  }
  rep.pass = rep.lhs <= rep.rhs * (1.0 + slack);
  return rep;
}

SlopeFit smoothing_exponent_fit(const GridSolution& v, double p, double q,
                                double t_min, double t_max) {
  if (p > q) throw InvalidParameter("smoothing fit needs p <= q");
  std::vector<double> xs, ys;
  for (int k = 0; k < v.levels(); ++k) {
    const double t = v.time(k) - v.grid().s;
    if (t < t_min || t > t_max || t <= 0) continue;
    const double norm = v.lp_norm(k, q);
    if (norm <= 0) continue;
    xs.push_back(std::log(t));
    ys.push_back(std::log(norm));
  }
  if (xs.size() < 4)
    throw InsufficientSamples("smoothing fit needs at least 4 time points");
  const int m = static_cast<int>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  SlopeFit fit;
  fit.points = m;
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return fit;
}

double heat_oracle_rel_error(const SpaceTimeGrid& grid, double sigma) {
  SpatialFn f = gaussian_profile(sigma, Vec::zero(3));
  GridSolution sol =
      solve_forward_cauchy(nullptr, f, SourceTerm{}, grid, SolveOptions{1, true});
  const int last = sol.levels() - 1;
  const double tt = sol.time(last) - grid.s;
  const double s2 = sigma * sigma + 2.0 * tt;
  const double amp = std::pow(sigma * sigma / s2, 1.5);
  double max_err = 0, max_exact = 0;
  Vec x(3);
  const int n = grid.n;
  for (int iz = 0; iz < n; ++iz) {
    x[2] = grid.node(iz);
    for (int iy = 0; iy < n; ++iy) {
      x[1] = grid.node(iy);
      for (int ix = 0; ix < n; ++ix) {
        x[0] = grid.node(ix);
        const double exact = amp * std::exp(-x.norm2() / (2.0 * s2));
        const double num = sol.value(last, ix, iy, iz);
        max_err = std::max(max_err, std::abs(num - exact));
        max_exact = std::max(max_exact, exact);
      }
    }
  }
  return max_err / max_exact;
}

SpatialFn gaussian_profile(double sigma, Vec center, double amp) {
  return [sigma, center, amp](const Vec& x) {
    return amp * std::exp(-(x - center).norm2() / (2.0 * sigma * sigma));
  };
}

SpatialFn homogeneous_profile(int d, double p, double ramp_start,
                              double ramp_end) {
  const double expo = -static_cast<double>(d) / p;
  return [expo, ramp_start, ramp_end](const Vec& x) {
    const double r = x.norm();
    if (r >= ramp_end) return 0.0;
    double ramp = 1.0;
    if (r > ramp_start) {
      const double u = (r - ramp_start) / (ramp_end - ramp_start);
      ramp = 0.5 * (1.0 + std::cos(M_PI * u));
    }
    return std::pow(std::max(r, 1e-12), expo) * ramp;
  };
}

}  // namespace driftlab
