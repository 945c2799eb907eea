#pragma once

#include <functional>
#include <memory>

#include "driftlab/fields.hpp"
#include "driftlab/lattice.hpp"

namespace driftlab {

/// One level of the bounded-smooth approximation sequence
/// b_m = c_m * heat_smooth(1_m b, eps_m).
struct MollifierSchedule {
  int m = 0;
  double eps_m = 0;
  double gamma_m = 0;
  double c_m = 1;
  double delta_m = 0;   // (sqrt(delta) + sqrt(C_S gamma_m^2))^2
  double C_S = 0;       // Sobolev constant used in delta_m
  int r = 3;            // exponent of the closeness criterion (r = d)

  std::map<std::string, std::string> record() const;
};

/// Lattice construction knobs.  The stored lattice covers the truncation
/// support capped at half-width box_cap; spacing is box diameter / divisions.
struct MollifyConfig {
  int divisions = 256;
  double box_cap = 6.0;
  double pad = 0.6;            // input sampling margin for the kernel reach
  double pad_sigmas = 4.2;     // kernel cut-off in standard deviations
  double eval_horizon = 2.0;   // time coverage for time-dependent lattices
  int time_divisions = 32;
};

/// Sharp cutoff 1_m b: zero where |b(t,x)| > m, |x| > m, t outside [0, m]
/// (the source is extended by 0 to t < 0).  Bounded by m; certificate is
/// carried over unchanged.
class TruncatedField final : public DriftField {
 public:
  TruncatedField(FieldPtr source, int m);

  int level() const { return m_; }
  const DriftField& source() const { return *source_; }
  const SingularLocus& source_locus() const { return source_->locus(); }
  bool static_core() const { return !source_->time_dependent(); }
  /// Spatial factor for static sources: b(x) 1_{|b(x)| <= m, |x| <= m}.
  void spatial_value(const Vec& x, Vec& out) const;

  using DriftField::value;
  void value(double t, const Vec& x, Vec& out) const override;

 private:
  FieldPtr source_;
  int m_;
};

FieldPtr truncate(const FieldPtr& field, int m);

/// Smooth bounded field obtained by Gaussian space-time convolution of a
/// truncated field, scaled by c in (0, 1].  Stored on a lattice; for
/// time-independent sources the time direction of the heat kernel acts on
/// the window 1_{[0,m]} only and is kept in closed form (an erf window),
/// so only a spatial lattice is stored.  Off-lattice points fall back to
/// the analytic truncated field (the smoothing is negligible there).
class MollifiedField final : public DriftField {
 public:
  double eps() const { return eps_; }
  double scale() const { return c_; }
  const MollifierSchedule& schedule() const { return sched_; }
  const SingularLocus& source_locus() const { return source_locus_; }

  bool has_static_core() const { return static_core_; }
  /// c * erf-window factor at time t (static-core fields; 1 otherwise).
  double time_weight(double t) const;
  /// Unscaled spatial factor: lattice interpolation inside the stored box,
  /// the analytic cutoff field outside (static-core fields only).
  void spatial_base(const Vec& x, Vec& out) const;
  const SpatialLattice& spatial_lattice() const { return lattice_; }
  /// sup over lattice nodes of |b_m| (includes the c factor).
  double lattice_sup() const { return c_ * lattice_.sup_magnitude(); }

  using DriftField::value;
  void value(double t, const Vec& x, Vec& out) const override;

  void export_block(std::ostream& os) const;

  // Built by heat_smooth / build_approximation.
  MollifiedField(std::shared_ptr<const TruncatedField> truncated,
                 SpatialLattice smoothed, double eps, double c,
                 MollifierSchedule sched);
  MollifiedField(std::shared_ptr<const TruncatedField> truncated,
                 std::vector<SpatialLattice> time_slabs, Axis time_axis,
                 double eps, double c, MollifierSchedule sched);

 private:
  std::shared_ptr<const TruncatedField> truncated_;
  SpatialLattice lattice_;            // static-core storage
  std::vector<SpatialLattice> slabs_; // time-dependent storage
  Axis time_axis_;
  bool static_core_ = true;
  double eps_ = 0;
  double c_ = 1;
  MollifierSchedule sched_;
  SingularLocus source_locus_;
};

using MollifiedPtr = std::shared_ptr<const MollifiedField>;

/// Componentwise Gaussian convolution in (t, x) with variance 2*eps per
/// axis, evaluated on a sampling lattice of the support.  Requires a
/// declared sup bound (UnboundedInput otherwise).
MollifiedPtr heat_smooth(const FieldPtr& bounded_field, double eps,
                         const MollifyConfig& cfg = {});

using GammaRule = std::function<double(int)>;
inline GammaRule default_gamma_rule() {
  return [](int m) { return 1.0 / m; };
}

/// b_m = c_m * heat_smooth(truncate(b, m), eps_m) with eps_m chosen by
/// bisection as the largest width whose lattice L^r distance to 1_m b stays
/// within gamma_m; c_m = delta / (sqrt(delta) + sqrt(C_S gamma_m^2))^2.
/// The certificate of b_m is exactly the input (delta, g).
std::pair<MollifiedPtr, MollifierSchedule> build_approximation(
    const FieldPtr& field, const FormBoundCertificate& cert, int m,
    const GammaRule& gamma_rule = default_gamma_rule(),
    const MollifyConfig& cfg = {},
    double eps_cap = std::numeric_limits<double>::infinity());

/// Dyadic sequence m, 2m, 4m, ... with eps forced strictly decreasing.
std::vector<std::pair<MollifiedPtr, MollifierSchedule>> build_schedule(
    const FieldPtr& field, const FormBoundCertificate& cert,
    const std::vector<int>& levels,
    const GammaRule& gamma_rule = default_gamma_rule(),
    const MollifyConfig& cfg = {});

struct Region {
  Vec lo, hi;       // spatial box
  double t0 = 0, t1 = 1;
};

/// Lattice L^2 norm of b1 - b2 over region x [t0, t1]; singular samples are
/// jittered by half a lattice cell.
double l2loc_distance(const DriftField& b1, const DriftField& b2,
                      const Region& region, double spacing,
                      int time_samples = 17);

}  // namespace driftlab
