#pragma once

#include <functional>
#include <vector>

#include "driftlab/fields.hpp"
#include "driftlab/mollify.hpp"

namespace driftlab {

/// Spatial weight rho(x) = (1 + kappa |x|^2)^{-theta}, theta > d/2, with
/// |grad rho| <= theta sqrt(kappa) rho.
struct Weight {
  double kappa = 2.5;
  double theta = 3.0;

  Weight() = default;
  Weight(double kappa_, double theta_, int d = 3) : kappa(kappa_), theta(theta_) {
    if (kappa <= 0) throw InvalidParameter("weight needs kappa > 0");
    if (theta <= 0.5 * d) throw InvalidParameter("weight needs theta > d/2");
  }

  double rho(const Vec& x) const {
    return std::pow(1.0 + kappa * x.norm2(), -theta);
  }
  void grad(const Vec& x, Vec& out) const {
    const double base = 1.0 + kappa * x.norm2();
    const double c = -2.0 * theta * kappa * std::pow(base, -theta - 1.0);
    out = Vec(x.d);
    for (int i = 0; i < x.d; ++i) out[i] = c * x[i];
  }
  double grad_bound_factor() const { return theta * std::sqrt(kappa); }
  /// Fraction of the weight mass beyond radius L (radial quadrature).
  double tail_fraction(double L, int d = 3) const;
};

/// Truncated box [-L, L]^3 with homogeneous Dirichlet boundary, n nodes per
/// axis, time interval [s, T] in `steps` uniform steps.
struct SpaceTimeGrid {
  double L = 4.0;
  int n = 96;
  double s = 0.0;
  double T = 0.25;
  int steps = 200;
  double cfl_safety = 1.25;

  double hx() const { return 2.0 * L / (n - 1); }
  double ht() const { return (T - s) / steps; }
  double node(int i) const { return -L + i * hx(); }

  /// h_t must stay within hx^2/(2d) * cfl_safety; throws StabilityViolation.
  void validate(int d = 3) const;
  /// rho(boundary)/rho(0) <= 1e-3 and weight tail beyond L <= 1%.
  void validate_weight(const Weight& w, int d = 3) const;
};

using SpatialFn = std::function<double(const Vec&)>;
using SpaceTimeFn = std::function<double(double, const Vec&)>;

/// Inhomogeneity |f| h: f may be singular (its magnitude is sampled with
/// half-cell jitter off the locus); h is a bounded space-time profile.
/// Either part may be absent.
struct SourceTerm {
  const DriftField* f_mag = nullptr;
  SpaceTimeFn h;
  bool empty() const { return f_mag == nullptr && !h; }
};

struct SolveOptions {
  int store_stride = 1;
  bool final_only = false;
};

/// Scalar solution values on stored time levels of the grid.
class GridSolution {
 public:
  GridSolution() = default;

  const SpaceTimeGrid& grid() const { return grid_; }
  int n() const { return grid_.n; }
  int levels() const { return static_cast<int>(times_.size()); }
  double time(int k) const { return times_[k]; }
  const std::vector<double>& times() const { return times_; }

  const double* level(int k) const {
    return data_.data() + static_cast<std::size_t>(k) * nodes();
  }
  double value(int k, int ix, int iy, int iz) const {
    return level(k)[(static_cast<std::size_t>(iz) * grid_.n + iy) * grid_.n + ix];
  }
  /// Trilinear interpolation within stored level k.
  double interp(int k, const Vec& x) const;

  std::size_t nodes() const {
    return static_cast<std::size_t>(grid_.n) * grid_.n * grid_.n;
  }

  double sup_norm(int k) const;
  /// Lattice L^p norm over interior nodes, optionally rho-weighted.
  double lp_norm(int k, double p, const Weight* w = nullptr) const;

  /// max over stored levels of |v| on the first interior layer, relative to
  /// the initial sup; diagnoses Dirichlet truncation leakage.
  double boundary_leak() const { return boundary_leak_; }
  const std::vector<double>& sup_history() const { return sup_history_; }
  double drift_delta() const { return drift_delta_; }
  bool drift_g_zero() const { return drift_g_zero_; }
  const GFunction& drift_g() const { return drift_g_; }
  long source_jitter_count() const { return source_jitter_; }

  void export_block(std::ostream& os) const;

 private:
  friend class SolveAccess;
  SpaceTimeGrid grid_;
  std::vector<double> times_;
  std::vector<double> data_;
  std::vector<double> sup_history_;
  double boundary_leak_ = 0;
  double drift_delta_ = 0;
  bool drift_g_zero_ = true;
  GFunction drift_g_;
  long source_jitter_ = 0;
};

/// Forward problem  dv/dt - Lap v + b . grad v = |f| h,  v(s,.) = f0,
/// homogeneous Dirichlet on the box.  Diffusion is implicit (dimension-split
/// tridiagonal solves), advection explicit first-order upwind.  Only bounded
/// drifts are accepted (RejectedSingularField otherwise); the advection CFL
/// number sup|b| ht/hx must stay below 0.5 (StabilityViolation).
GridSolution solve_forward_cauchy(const DriftField* b, const SpatialFn& f0,
                                  const SourceTerm& src,
                                  const SpaceTimeGrid& grid,
                                  const SolveOptions& opts = {});

/// Terminal problem  dw/dt + Lap w - b . grad w = -|f| h,  w(r,.) = f0,
/// solved on [s, r] as the time-reflected forward problem (the drift sign
/// follows the generator of the simulated diffusion).  The returned
/// solution's level times run forward: level 0 holds w(r - tau_0) = w(r),
/// the last stored level holds w at t = s.
GridSolution solve_backward_terminal(const DriftField* b, const SpatialFn& f0,
                                     const SourceTerm& src,
                                     const SpaceTimeGrid& grid, double r,
                                     const SolveOptions& opts = {});

/// Named terms of the weighted gradient estimate at exponent q.
struct EnergyReport {
  double q = 0, kappa = 0, theta = 0;
  double lhs_v = 0;         // ||v||^q_{Linf Lq_rho}
  double lhs_grad = 0;      // ||grad v||^q_{Linf Lq_rho}
  double lhs_grad_pow = 0;  // ||grad |grad v|^{q/2}||^2_{L2 L2_rho}
  double rhs_source = 0;    // ||f |h|^{q/2}||^2_{L2 L2_rho}
  double rhs_grad_f = 0;    // ||grad f0||^q_{Lq_rho}
  double rhs_f = 0;         // ||f0||^q_{Lq_rho}
  double lhs_total = 0, rhs_total = 0, ratio = 0;
  long jitter_count = 0;
};

/// q must lie in ]d, delta^{-1/2}[ for the drift certificate recorded in the
/// solution (QOutOfRange otherwise).
EnergyReport energy_report(const GridSolution& v, double q, const Weight& w,
                           const SourceTerm& src, const SpatialFn& f0);

struct FellerReport {
  std::vector<int> levels;
  std::vector<double> gaps;      // sup gaps between consecutive solves
  double f_sup = 0;
  bool max_principle_ok = true;  // sup nonincreasing for the homogeneous runs
};

/// Sup-norm gaps || U(b_{next}) f - U(b_prev) f ||_inf at the final time for
/// a mollifier schedule (needs >= 3 levels).
FellerReport feller_convergence(
    const std::vector<std::pair<MollifiedPtr, MollifierSchedule>>& schedule,
    const SpatialFn& f0, const SpaceTimeGrid& grid);

struct ContractionReport {
  double p = 0;
  double lhs = 0;  // max_t ||v(t)||_p e^{-G(t)/(p sqrt(delta))}
  double rhs = 0;  // ||f||_p
  bool pass = false;
};

/// Homogeneous-run L^p quasi-contraction check; p must exceed
/// 2/(2 - sqrt(delta)) (POutOfRange otherwise).
ContractionReport lp_contraction_check(const GridSolution& v, double p,
                                       const FormBoundCertificate& cert,
                                       double slack = 0.05);

struct SlopeFit {
  double slope = 0;
  int points = 0;
};

/// Log-log slope of ||v(t)||_q over stored levels with t in
/// [t_min, t_max]; needs p < q and at least 4 usable levels
/// (InsufficientSamples otherwise).
SlopeFit smoothing_exponent_fit(const GridSolution& v, double p, double q,
                                double t_min, double t_max);

/// Max abs error of the zero-drift solver against the closed-form Gaussian
/// heat evolution, as a fraction of the exact peak.  Doubles as the declared
/// grid error budget of probabilistic cross-checks.
double heat_oracle_rel_error(const SpaceTimeGrid& grid, double sigma);

/// Initial data presets.
SpatialFn gaussian_profile(double sigma, Vec center, double amp = 1.0);
/// |x|^{-d/p} profile with a smooth outer ramp, the sharp-rate data for the
/// L^p -> L^q smoothing estimate.
SpatialFn homogeneous_profile(int d, double p, double ramp_start,
                              double ramp_end);

}  // namespace driftlab
