#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "driftlab/fields.hpp"
#include "driftlab/pde.hpp"

namespace driftlab {

/// Euler-Maruyama run parameters.  The drift increment per (sub)step must
/// stay below half a typical diffusion increment:
/// (ht/substep) sup|b| <= 0.5 sqrt(2 ht / substep).
struct SimConfig {
  double ht = 1.0 / 512;
  double T = 1.0;
  int n_paths = 10000;
  std::uint64_t seed = 1;
  int substep = 4;        // micro-steps near the singular locus
  bool zero_noise = false;  // debug mode: Brownian increments forced to 0

  int steps() const { return static_cast<int>(std::llround(T / ht)); }
  void validate(const DriftField& drift) const;
};

/// Monte Carlo family of trajectories of
///   X_{k+1} = X_k - b(t_k, X_k) ht + sqrt(2) (W_{k+1} - W_k),
/// with per-path counter-based noise streams (stream id = path index).
class PathEnsemble {
 public:
  int n_paths() const { return cfg_.n_paths; }
  int steps() const { return cfg_.steps(); }
  int dim() const { return d_; }
  const SimConfig& config() const { return cfg_; }
  const Vec& start() const { return start_; }
  double time(int k) const { return k * cfg_.ht; }

  double coord(int p, int k, int axis) const {
    return data_[(static_cast<std::size_t>(p) * (steps() + 1) + k) * d_ + axis];
  }
  Vec point(int p, int k) const {
    Vec x(d_);
    for (int a = 0; a < d_; ++a) x[a] = coord(p, k, a);
    return x;
  }

  /// Step index of time t; throws TimeUnavailable off the step lattice.
  int step_of(double t) const;

  const DriftField* drift() const { return drift_.get(); }
  double drift_delta() const;
  const GFunction& drift_g() const;
  const SingularLocus& integration_locus() const { return locus_; }

  /// Header (N, steps, d, ht, seed) + path-major payload.
  void export_block(std::ostream& os) const;

  const std::vector<double>& raw() const { return data_; }

 private:
  friend PathEnsemble simulate_euler(const FieldPtr&, const Vec&,
                                     const SimConfig&);
  SimConfig cfg_;
  int d_ = 3;
  Vec start_;
  FieldPtr drift_;
  SingularLocus locus_;  // locus of the underlying singular field
  std::vector<double> data_;
};

/// N independent paths; bit-identical for identical (seed, N, ht, field).
PathEnsemble simulate_euler(const FieldPtr& b_m, const Vec& x,
                            const SimConfig& cfg);

struct FunctionalReport {
  std::string functional;
  double lhs = 0;
  double rhs = 0;
  double ratio = 0;
  double stderr_est = 0;
  double cross_value = 0;  // PDE cross-check at the start point
  double cross_sup = 0;    // sup_x of the PDE cross-check level
  double budget = 0;       // declared grid error budget used by `pass`
  bool pass = true;
};

/// Path-time expectation of |f h| against the space-time norm
/// ||f |h|^{q/2}||_{L^2}^{2/q}; q must lie in ]d, delta^{-1/2}[ for the
/// driving drift's certificate.
FunctionalReport krylov_functional(const PathEnsemble& ens,
                                   const DriftField& f_field,
                                   const TestFunction& h, double q);

struct Window {
  double s = 0;
  double r = 1;
};

/// E int_s^r |b_k(t, X_t)| dt against F(r-s) = (r-s) + sup-window integral
/// of g.  When a grid is supplied the terminal-value problem with source
/// |b_k| provides an independent value of the same expectation.
FunctionalReport expected_drift_integral(const PathEnsemble& ens,
                                         const DriftField& b_k,
                                         const FormBoundCertificate& cert,
                                         const Window& window,
                                         const SpaceTimeGrid* grid = nullptr,
                                         double grid_budget = 0);

/// E sup_{t, a<=h} |X_{t+a} - X_t|^beta and the fitted constant
/// C = ((1-beta) lhs / F~(h))^{1/beta}, F~(h) = h^{1/2} + F(h).
FunctionalReport modulus_of_continuity(const PathEnsemble& ens, double beta,
                                       double h);

/// Max over coordinates of the two-sample Kolmogorov-Smirnov statistic
/// between the marginals at time t.
double marginal_distance(const PathEnsemble& e1, const PathEnsemble& e2,
                         double t);

/// Average over paths of the fraction of [s, r] spent inside |X| < radius.
double occupation_near_origin(const PathEnsemble& ens, double radius,
                              const Window& window);

/// Monte Carlo mean of f(X_T) against the terminal-value solve w(0, x);
/// passes when |gap| <= 3 stderr + grid_budget.
FunctionalReport duality_check(const Vec& x, const SpatialFn& f, double T,
                               const FieldPtr& b_m, const SpaceTimeGrid& grid,
                               const SimConfig& cfg, double grid_budget);

}  // namespace driftlab
