#include "driftlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "driftlab/lattice.hpp"
#include "driftlab/mollify.hpp"
#include "driftlab/quadrature.hpp"
#include "driftlab/rng.hpp"

namespace driftlab {

void SimConfig::validate(const DriftField& drift) const {
  if (ht <= 0 || T <= 0 || n_paths < 1 || substep < 1)
    throw ConfigInvalid("simulation parameters out of range");
  if (std::abs(steps() * ht - T) > 1e-9 * std::max(1.0, T))
    throw ConfigInvalid("horizon T must be a multiple of the step");
  if (!drift.bounded_smooth())
    throw ConfigInvalid("simulation drift must be bounded (mollified)");
  const double micro = ht / substep;
  if (micro * drift.sup_bound() > 0.5 * std::sqrt(2.0 * micro) + 1e-12)
    throw ConfigInvalid(
        "drift increment per (sub)step exceeds half a diffusion increment");
}

int PathEnsemble::step_of(double t) const {
  const double s = t / cfg_.ht;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9 || r < 0 || r > steps())
    throw TimeUnavailable("time is not on the stored step lattice");
  return static_cast<int>(r);
}

double PathEnsemble::drift_delta() const {
  return drift_ && drift_->certificate() ? drift_->certificate()->delta : 0.0;
}

const GFunction& PathEnsemble::drift_g() const {
  static const GFunction kZero;
  return drift_ && drift_->certificate() ? drift_->certificate()->g : kZero;
}

void PathEnsemble::export_block(std::ostream& os) const {
  os.write("DLE1", 4);
  auto put = [&os](auto v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put(static_cast<std::uint64_t>(cfg_.n_paths));
  put(static_cast<std::uint64_t>(steps()));
  put(static_cast<std::uint32_t>(d_));
  put(cfg_.ht);
  put(static_cast<std::uint64_t>(cfg_.seed));
  os.write(reinterpret_cast<const char*>(data_.data()),
           static_cast<std::streamsize>(data_.size() * sizeof(double)));
}

PathEnsemble simulate_euler(const FieldPtr& b_m, const Vec& x,
                            const SimConfig& cfg) {
  if (!b_m) throw ConfigInvalid("simulate_euler: null drift");
  cfg.validate(*b_m);
  const int d = b_m->dim();
  if (x.d != d) throw DimensionMismatch("start point dimension");

  PathEnsemble ens;
  ens.cfg_ = cfg;
  ens.d_ = d;
  ens.start_ = x;
  ens.drift_ = b_m;
  if (auto mol = std::dynamic_pointer_cast<const MollifiedField>(b_m))
    ens.locus_ = mol->source_locus();
  else
    ens.locus_ = b_m->locus();

  const int K = cfg.steps();
  ens.data_.assign(static_cast<std::size_t>(cfg.n_paths) * (K + 1) * d, 0.0);

  const double near = 4.0 * std::sqrt(2.0 * cfg.ht);
  Vec X(d), b(d);
  for (int p = 0; p < cfg.n_paths; ++p) {
    NormalStream stream(cfg.seed, static_cast<std::uint64_t>(p));
    X = x;
    double* row =
        ens.data_.data() + static_cast<std::size_t>(p) * (K + 1) * d;
    for (int a = 0; a < d; ++a) row[a] = X[a];
    for (int k = 0; k < K; ++k) {
      const bool refine = !ens.locus_.empty() &&
                          ens.locus_.space_distance(X) < near;
      const int S = refine ? cfg.substep : 1;
      const double mh = cfg.ht / S;
      const double noise = cfg.zero_noise ? 0.0 : std::sqrt(2.0 * mh);
      for (int j = 0; j < S; ++j) {
        const double t = k * cfg.ht + j * mh;
        b_m->value(t, X, b);
        for (int a = 0; a < d; ++a)
          X[a] += -b[a] * mh + noise * stream.next();
      }
      double* out = row + static_cast<std::size_t>(k + 1) * d;
      for (int a = 0; a < d; ++a) out[a] = X[a];
    }
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Path functionals
// ---------------------------------------------------------------------------

namespace {

struct MeanStderr {
  double mean = 0;
  double se = 0;
};

MeanStderr mean_stderr(const std::vector<double>& vals) {
  const std::size_t n = vals.size();
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n > 1 ? n - 1 : 1);
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

// |f(t, x)| with the path-quadrature jitter rule (half a diffusion step in
// the first coordinate when sitting exactly on the locus).
double singular_magnitude(const DriftField& f, double t, const Vec& x,
                          double jitter_len) {
  Vec xx = x;
  if (f.locus().contains(t, xx)) xx[0] += jitter_len;
  return f.magnitude(t, xx);
}

}  // namespace

FunctionalReport krylov_functional(const PathEnsemble& ens,
                                   const DriftField& f_field,
                                   const TestFunction& h, double q) {
  if (!q_admissible(f_field.dim(), ens.drift_delta(), q))
    throw QOutOfRange("q outside ]d, delta^{-1/2}[ for the driving drift");
  const int N = ens.n_paths();
  const int K = ens.steps();
  const double ht = ens.config().ht;
  const double jit = 0.5 * std::sqrt(2.0 * ht);

  std::vector<double> sums(N, 0.0);
  for (int p = 0; p < N; ++p) {
    double acc = 0;
    for (int k = 0; k < K; ++k) {
      const double t = ens.time(k);
      const double hv = h.value(t, ens.point(p, k));
      if (hv == 0.0) continue;
      acc += singular_magnitude(f_field, t, ens.point(p, k), jit) *
             std::abs(hv) * ht;
    }
    sums[p] = acc;
  }
  const auto ms = mean_stderr(sums);

  // ||f |h|^{q/2}||_{L^2([0,T] x R^d)}^{2/q}; the bump factorizes in (t, x).
  const int d = f_field.dim();
  Vec lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    lo[a] = h.center()[a] - h.radius();
    hi[a] = h.center()[a] + h.radius();
  }
  auto zones = field_refine_zones(f_field, 1e-5, 12);
  const double T = ens.config().T;
  double time_int = 0;  // int_0^T chi(t)^q dt
  {
    const int nt = 256;
    for (int i = 0; i < nt; ++i) {
      const double t = (i + 0.5) * T / nt;
      time_int += std::pow(h.time_factor(t), q) * (T / nt);
    }
  }
  double space_int = 0;  // int |f|^2 psi^q dx
  if (!f_field.time_dependent()) {
    space_int = integrate_box(
        d,
        [&](const Vec& xx, double half) {
          const double psi = h.space_factor(xx);
          if (psi == 0.0) return 0.0;
          Vec xj = xx;
          if (f_field.locus().contains(0.0, xj)) xj[0] += half;
          Vec bv(d);
          f_field.value(0.0, xj, bv);
          return bv.norm2() * std::pow(psi, q);
        },
        lo, hi, zones, 16, 12, 1e-5);
    space_int *= time_int;
  } else {
    const int nt = 33;
    for (int i = 0; i < nt; ++i) {
      const double t = (i + 0.5) * T / nt;
      const double chi = std::pow(h.time_factor(t), q);
      if (chi == 0.0) continue;
      space_int += chi * (T / nt) *
                   integrate_box(
                       d,
                       [&](const Vec& xx, double half) {
                         const double psi = h.space_factor(xx);
                         if (psi == 0.0) return 0.0;
                         Vec xj = xx;
                         if (f_field.locus().contains(t, xj)) xj[0] += half;
                         Vec bv(d);
                         f_field.value(t, xj, bv);
                         return bv.norm2() * std::pow(psi, q);
                       },
                       lo, hi, zones, 12, 10, 1e-5);
    }
  }

  FunctionalReport rep;
  rep.functional = "krylov";
  rep.lhs = ms.mean;
  rep.stderr_est = ms.se;
  rep.rhs = std::pow(std::max(space_int, 0.0), 1.0 / q);
  rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
  return rep;
}

FunctionalReport expected_drift_integral(const PathEnsemble& ens,
                                         const DriftField& b_k,
                                         const FormBoundCertificate& cert,
                                         const Window& window,
                                         const SpaceTimeGrid* grid,
                                         double grid_budget) {
  const int N = ens.n_paths();
  const double ht = ens.config().ht;
  const int k0 = ens.step_of(window.s);
  const int k1 = ens.step_of(window.r);
  const double jit = 0.5 * std::sqrt(2.0 * ht);

  std::vector<double> sums(N, 0.0);
  for (int p = 0; p < N; ++p) {
    double acc = 0;
    for (int k = k0; k < k1; ++k)
      acc += singular_magnitude(b_k, ens.time(k), ens.point(p, k), jit) * ht;
    sums[p] = acc;
  }
  const auto ms = mean_stderr(sums);

  FunctionalReport rep;
  rep.functional = "drift-integral";
  rep.lhs = ms.mean;
  rep.stderr_est = ms.se;
  const double hwin = window.r - window.s;
  rep.rhs = hwin + cert.g.max_window_integral(hwin, ens.config().T);
  rep.ratio = rep.rhs > 0 ? rep.lhs / rep.rhs : 0.0;
  rep.budget = grid_budget;

  if (grid) {
    // Terminal-value problem over [s, r] with source |b_k| and terminal 0;
    // its value at the start level reproduces the same expectation.
    SpaceTimeGrid g = *grid;
    g.s = window.s;
    g.T = window.r;
    SourceTerm src;
    src.f_mag = &b_k;
    SolveOptions opts;
    opts.final_only = true;
    GridSolution w = solve_backward_terminal(
        ens.drift(), [](const Vec&) { return 0.0; }, src, g, window.r, opts);
    const int last = w.levels() - 1;
    rep.cross_value = w.interp(last, ens.start());
    rep.cross_sup = w.sup_norm(last);
    rep.pass = std::abs(rep.lhs - rep.cross_value) <=
               3.0 * rep.stderr_est + grid_budget;
  }
  return rep;
}

FunctionalReport modulus_of_continuity(const PathEnsemble& ens, double beta,
                                       double h) {
  if (beta <= 0 || beta >= 1)
    throw InvalidParameter("modulus needs beta in (0,1)");
  const double ht = ens.config().ht;
  const int lag = static_cast<int>(std::round(h / ht));
  if (lag < 1 || std::abs(lag * ht - h) > 1e-9)
    throw InvalidParameter("h must be a positive multiple of the step");
  const int N = ens.n_paths();
  const int K = ens.steps();
  const int d = ens.dim();

  std::vector<double> sups(N, 0.0);
  for (int p = 0; p < N; ++p) {
    double best2 = 0;
    for (int k = 0; k + 1 <= K; ++k) {
      const int jmax = std::min(K, k + lag);
      for (int j = k + 1; j <= jmax; ++j) {
        double dist2 = 0;
        for (int a = 0; a < d; ++a) {
          const double diff = ens.coord(p, j, a) - ens.coord(p, k, a);
          dist2 += diff * diff;
        }
        best2 = std::max(best2, dist2);
      }
    }
    sups[p] = std::pow(best2, 0.5 * beta);
  }
  const auto ms = mean_stderr(sups);

  FunctionalReport rep;
  rep.functional = "modulus";
  rep.lhs = ms.mean;
  rep.stderr_est = ms.se;
  const double F = h + ens.drift_g().max_window_integral(h, ens.config().T);
  const double Ftilde = std::sqrt(h) + F;
  rep.rhs = Ftilde;
  // fitted constant: lhs = C^beta/(1-beta) * Ftilde
  rep.ratio = std::pow(rep.lhs * (1.0 - beta) / Ftilde, 1.0 / beta);
  return rep;
}

double marginal_distance(const PathEnsemble& e1, const PathEnsemble& e2,
                         double t) {
  const int k1 = e1.step_of(t);
  const int k2 = e2.step_of(t);
  if (e1.dim() != e2.dim())
    throw DimensionMismatch("marginal_distance: dimensions differ");
  const int d = e1.dim();
  double best = 0;
  std::vector<double> a(e1.n_paths()), b(e2.n_paths());
  for (int axis = 0; axis < d; ++axis) {
    for (int p = 0; p < e1.n_paths(); ++p) a[p] = e1.coord(p, k1, axis);
    for (int p = 0; p < e2.n_paths(); ++p) b[p] = e2.coord(p, k2, axis);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // two-sample KS by merge scan; ties advance both sides before measuring
    std::size_t i = 0, j = 0;
    double ks = 0;
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
      const double v = std::min(a[i], b[j]);
      while (i < a.size() && a[i] == v) ++i;
      while (j < b.size() && b[j] == v) ++j;
      ks = std::max(ks, std::abs(i / na - j / nb));
    }
    best = std::max(best, ks);
  }
  return best;
}

double occupation_near_origin(const PathEnsemble& ens, double radius,
                              const Window& window) {
  if (radius <= 0) throw InvalidParameter("occupation needs radius > 0");
  const int k0 = ens.step_of(window.s);
  const int k1 = ens.step_of(window.r);
  const int d = ens.dim();
  const double r2 = radius * radius;
  double acc = 0;
  for (int p = 0; p < ens.n_paths(); ++p) {
    int inside = 0;
    for (int k = k0; k < k1; ++k) {
      double n2 = 0;
      for (int a = 0; a < d; ++a) {
        const double c = ens.coord(p, k, a);
        n2 += c * c;
      }
      if (n2 < r2) ++inside;
    }
    acc += static_cast<double>(inside) / (k1 - k0);
  }
  return acc / ens.n_paths();
}

FunctionalReport duality_check(const Vec& x, const SpatialFn& f, double T,
                               const FieldPtr& b_m, const SpaceTimeGrid& grid,
                               const SimConfig& cfg, double grid_budget) {
  SimConfig c = cfg;
  c.T = T;
  PathEnsemble ens = simulate_euler(b_m, x, c);
  const int K = ens.steps();
  std::vector<double> vals(ens.n_paths());
  for (int p = 0; p < ens.n_paths(); ++p) vals[p] = f(ens.point(p, K));
  const auto ms = mean_stderr(vals);

  SpaceTimeGrid g = grid;
  g.s = 0;
  g.T = T;
  SolveOptions opts;
  opts.final_only = true;
  GridSolution w = solve_backward_terminal(b_m.get(), f, SourceTerm{}, g, T,
                                           opts);
  const int last = w.levels() - 1;

  FunctionalReport rep;
  rep.functional = "duality";
  rep.lhs = ms.mean;
  rep.stderr_est = ms.se;
  rep.rhs = w.interp(last, x);
  rep.cross_value = rep.rhs;
  rep.cross_sup = w.sup_norm(last);
  rep.budget = grid_budget;
  rep.ratio = rep.rhs != 0 ? rep.lhs / rep.rhs : 0.0;
  rep.pass = std::abs(rep.lhs - rep.rhs) <= 3.0 * ms.se + grid_budget;
  return rep;
}

}  // namespace driftlab
