#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "driftlab/errors.hpp"

namespace driftlab {

inline constexpr int kMaxDim = 8;

/// Fixed-capacity point/vector in R^d (3 <= d <= kMaxDim).
struct Vec {
  std::array<double, kMaxDim> v{};
  int d = 3;

  Vec() = default;
  explicit Vec(int dim) : d(dim) {}
  Vec(std::initializer_list<double> xs) {
    d = static_cast<int>(xs.size());
    int i = 0;
    for (double x : xs) v[i++] = x;
  }

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }

  double norm2() const {
    double s = 0;
    for (int i = 0; i < d; ++i) s += v[i] * v[i];
    return s;
  }
  double norm() const { return std::sqrt(norm2()); }

  Vec& operator+=(const Vec& o) {
    for (int i = 0; i < d; ++i) v[i] += o.v[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (int i = 0; i < d; ++i) v[i] -= o.v[i];
    return *this;
  }
  Vec& operator*=(double c) {
    for (int i = 0; i < d; ++i) v[i] *= c;
    return *this;
  }
  static Vec zero(int dim) { return Vec(dim); }
};

inline Vec operator-(Vec a, const Vec& b) { return a -= b; }
inline Vec operator+(Vec a, const Vec& b) { return a += b; }
inline Vec operator*(double c, Vec a) { return a *= c; }

/// Nonnegative time profile g(t) together with its antiderivative
/// G(t) = \int_0^t g.  G is nondecreasing with G(0) = 0.
class GFunction {
 public:
  enum class Kind { Zero, Constant, Power, LogPower, Sum };

  GFunction() : kind_(Kind::Zero) {}

  static GFunction zero() { return GFunction(); }
  static GFunction constant(double c);
  /// g(t) = amp * |t - t0|^{-alpha}, 0 < alpha < 1 (closed-form G).
  static GFunction power(double amp, double t0, double alpha);
  /// g(t) = amp * |t - t0|^{-1} (log(e + |t - t0|^{-1}))^{-1-gamma}.
  /// G is integrable but has no elementary antiderivative; it is tabulated
  /// on a graded grid over [0, t_max].
  static GFunction log_power(double amp, double t0, double gamma,
                             double t_max);
  static GFunction weighted_sum(double c1, const GFunction& g1, double c2,
                                const GFunction& g2);

  double g(double t) const;
  double G(double t) const;
  /// sup over window placements s in [0, T-h] of \int_s^{s+h} g.
  double max_window_integral(double h, double T) const;

  bool is_zero() const { return kind_ == Kind::Zero; }
  Kind kind() const { return kind_; }
  std::string kind_name() const;
  std::vector<double> params() const;

 private:
  Kind kind_;
  double amp_ = 0, t0_ = 0, alpha_ = 0, gamma_ = 0;
  // Sum representation: G(t) = sum c_i G_i(t).
  std::vector<std::pair<double, std::shared_ptr<const GFunction>>> terms_;
  // LogPower antiderivative table (graded nodes, cumulative values).
  std::shared_ptr<const std::vector<std::pair<double, double>>> table_;
};

enum class Provenance {
  Hardy,
  StrichartzWeakLd,
  HolderSobolevLd,
  YoungLps,
  MorreyHeuristic,
  NumericEstimate,
  SumRule,
};

std::string provenance_name(Provenance p);

/// Certificate for the quadratic-form bound
///   \int ||b(t,.)phi(t,.)||_2^2 dt
///     <= delta \int ||grad phi||_2^2 dt + \int g(t) ||phi(t,.)||_2^2 dt.
struct FormBoundCertificate {
  double delta = 0;
  GFunction g;
  Provenance provenance = Provenance::NumericEstimate;

  /// Serialized record {delta, g_kind, g_params, provenance}.
  std::map<std::string, std::string> record() const;
};

/// Where a field blows up; integrators avoid exact samples on it.
struct SingularLocus {
  enum class Kind { Point, Sphere, TimeLine };
  struct Part {
    Kind kind;
    Vec center;     // Point: the point; Sphere: the center
    double radius;  // Sphere only
    double t0;      // TimeLine only
  };
  std::vector<Part> parts;

  bool empty() const { return parts.empty(); }
  static SingularLocus none() { return {}; }
  static SingularLocus point(const Vec& p);
  static SingularLocus sphere(const Vec& c, double radius);
  static SingularLocus time_line(double t0);

  bool contains(double t, const Vec& x, double tol = 1e-12) const;
  /// Distance from x to the nearest spatial part (infinity if none).
  double space_distance(const Vec& x) const;
  double time_distance(double t) const;
  void merge(const SingularLocus& other);
};

/// Evaluatable drift vector field b(t, x) on [0, inf) x R^d, d >= 3.
class DriftField {
 public:
  virtual ~DriftField() = default;

  int dim() const { return d_; }
  const std::string& id() const { return id_; }
  const SingularLocus& locus() const { return locus_; }
  const std::optional<FormBoundCertificate>& certificate() const {
    return cert_;
  }
  bool bounded_smooth() const { return bounded_smooth_; }
  /// Declared sup bound; only meaningful when bounded_smooth().
  double sup_bound() const { return sup_bound_; }
  bool time_dependent() const { return time_dependent_; }

  /// Raw evaluation.  Callers must keep (t, x) off the singular locus;
  /// use eval_drift for the checked entry point.
  virtual void value(double t, const Vec& x, Vec& out) const = 0;

  Vec value(double t, const Vec& x) const {
    Vec out(d_);
    value(t, x, out);
    return out;
  }
  double magnitude(double t, const Vec& x) const {
    return value(t, x).norm();
  }

 protected:
  DriftField(int d, std::string id) : d_(d), id_(std::move(id)) {
    if (d < 3) throw InvalidParameter("field dimension must be >= 3");
  }

  int d_;
  std::string id_;
  SingularLocus locus_;
  std::optional<FormBoundCertificate> cert_;
  bool bounded_smooth_ = false;
  double sup_bound_ = 0;
  bool time_dependent_ = false;
};

using FieldPtr = std::shared_ptr<const DriftField>;

/// Checked evaluation: throws SingularSample when (t, x) lies on the
/// declared singular locus.
Vec eval_drift(const DriftField& field, double t, const Vec& x);

/// Bounded time modulation kappa(t), |kappa| <= 1.
struct TimeModulation {
  enum class Kind { One, Cos };
  Kind kind = Kind::One;
  double amplitude = 1.0;  // |amplitude| <= 1
  double omega = 0.0;

  double operator()(double t) const {
    return kind == Kind::One ? amplitude : amplitude * std::cos(omega * t);
  }
  static TimeModulation one() { return {}; }
  static TimeModulation cosine(double amplitude, double omega) {
    return {Kind::Cos, amplitude, omega};
  }
};

FieldPtr make_zero_field(int d);

/// Attracting/repelling scale-invariant field
///   b(t, x) = sign * sqrt(delta) * (d-2)/2 * kappa(t) * |x|^{-2} x,
/// certificate (delta, g = 0) by Hardy's inequality.  Sign +1 is the
/// attracting convention for the simulator's -b dt drift term.
FieldPtr make_hardy_drift(int d, double delta, int sign,
                          TimeModulation kappa = TimeModulation::one());

/// Radial shell field with |b(x)|^2 = C * 1_{1-a<|x|<1+a} /
/// (||x|-1| * (-ln ||x|-1|)^c); locally L^2 but not L^{2+eps}.
FieldPtr make_shell_log_drift(double C, double a, double c, int d = 3);

/// Hardy-profile field |b| = coef/|x| carrying the weak-L^d certificate
/// delta_1 = (||b||_{d,w} Omega_d^{-1/d} 2/(d-2))^2.
FieldPtr make_weak_ld_drift(int d, double coef);

/// Mixed-norm (L^p_t L^q_x) field b(t,x) = amp |t-t0|^{-sigma} u(x) with
/// u = |x|^{-nu} 1_{|x|<=R} x/|x|; certificate via the Young split with
/// delta = C_S (1+eps) (d/q)^2 and g(t) = (1+1/eps)(2/p)^2 ||b(t,.)||_q^p.
struct LpsParams {
  double amp = 0.5;
  double nu = 0.4;
  double R = 1.0;
  double t0 = 0.35;
  double sigma = 0.15;
  double q = 6.0;  // spatial exponent; p solves d/q + 2/p = 1
  double eps = 0.5;
};
FieldPtr make_lps_drift(int d, const LpsParams& p = {});

/// Time-modulated Hardy field plus a spatially uniform component whose
/// amplitude is time-singular: |a(t)|^2 = C |t-t0|^{-1}
/// (log(e + |t-t0|^{-1}))^{-1-gamma}; g is tabulated numerically.
FieldPtr make_hardy_time_drift(int d, double delta, int sign, double omega,
                               double tsing_amp, double t0, double gamma,
                               double t_max = 8.0);

/// Pointwise sum with the certificate combined by the sum rule
/// sqrt(delta) = sqrt(delta_1) + sqrt(delta_2).
FieldPtr sum_fields(const FieldPtr& b1, const FieldPtr& b2);

/// Analytic bounded smooth field (testing / constant-drift runs).
FieldPtr make_bounded_field(
    int d, std::function<void(double, const Vec&, Vec&)> fn, double sup_bound,
    bool time_dependent, std::string id);

FieldPtr with_certificate(const FieldPtr& f, FormBoundCertificate cert);

/// Catalog lookup: ids `zero`, `hardy`, `hardy-time`, `shell-log`, `lps`,
/// `weak-ld`, `sum:<id>+<id>`; parameters by key (delta, sign, omega, ...).
FieldPtr make_field(const std::string& catalog_id,
                    const std::map<std::string, double>& params = {});

/// Unit-ball volume in R^d (the standard reading pi^{d/2}/Gamma(d/2+1)).
double unit_ball_volume(int d);
/// Surface area of the unit sphere S^{d-1}.
double unit_sphere_area(int d);
/// Sharp constant C_S in ||u||_{2d/(d-2)}^2 <= C_S ||grad u||_2^2.
double sharp_sobolev_constant(int d);

/// delta_1 = (norm * Omega_d^{-1/d} * 2/(d-2))^2 with the standard
/// unit-ball volume.
double strichartz_delta(double weak_ld_norm, int d);
/// Both readings of Omega_d: the standard volume pi^{d/2}/Gamma(d/2+1)
/// and the alternative pi^{d/2}*Gamma(d/2+1) that appears in print.
struct StrichartzReadings {
  double delta_standard;
  double delta_alt;
  double omega_standard;
  double omega_alt;
};
StrichartzReadings strichartz_delta_readings(double weak_ld_norm, int d);

/// Admissible exponent interval ]d, delta^{-1/2}[ for the gradient
/// estimates; empty unless delta < d^{-2}.
std::pair<double, double> admissible_q_interval(int d, double delta);
bool q_admissible(int d, double delta, double q);
/// Quasi-contraction exponent interval ]2/(2 - sqrt(delta)), inf[
/// (requires delta < 4).
double contraction_p_lower(double delta);

/// Smooth compactly supported space-time test function
///   phi(t,x) = chi((t-tc)/tau) * psi(|x-xc|/r),
/// with cutoff chi(u) = exp(steep*(1 - 1/(1-u^2))) on |u|<1 and radial
/// profile psi(rho) = core(rho) * exp(steep*(1 - 1/(1-rho^2))),
/// core(rho) = ((mu^2+rho^2)/(mu^2+1))^{-eta/2}.  eta = 0 recovers the
/// plain bump; eta = (d-2)/2 with small mu tracks the Hardy optimizers.
/// Value and gradient are exact closed forms, identically 0 outside the
/// support ball x interval.
class TestFunction {
 public:
  TestFunction(int d, double tc, Vec xc, double r, double tau,
               double eta = 0.0, double mu = 0.1, double steep = 1.0,
               double steep_t = 1.0);

  int dim() const { return d_; }
  double center_time() const { return tc_; }
  const Vec& center() const { return xc_; }
  double radius() const { return r_; }
  double time_radius() const { return tau_; }
  double eta() const { return eta_; }
  double mu() const { return mu_; }

  double value(double t, const Vec& x) const {
    return time_factor(t) * space_factor(x);
  }
  /// Spatial gradient of value at (t, x).
  void gradient(double t, const Vec& x, Vec& out) const;

  // Separable parts (value = time_factor * space_factor).
  double time_factor(double t) const;
  double space_factor(const Vec& x) const;
  void space_gradient(const Vec& x, Vec& out) const;

  bool in_space_support(const Vec& x) const;
  bool in_time_support(double t) const;

 private:
  int d_;
  double tc_;
  Vec xc_;
  double r_, tau_, eta_, mu_, steep_, steep_t_;
};

/// Deterministic generator of test functions, seeded and indexed: draw(i)
/// depends only on (spec, i).
struct TestFunctionFamily {
  enum class Pattern {
    OriginConcentrating,  // centered on a point locus, shrinking core radius
    ShellProbing,         // centers on a sphere locus
    Generic,              // seeded centers/radii, plain bumps
  };
  Pattern pattern = Pattern::Generic;
  int d = 3;
  Vec anchor;           // locus point / sphere center
  double sphere_radius = 1.0;
  double base_radius = 1.0;
  double time_center = 0.5;
  double time_radius = 0.5;
  std::uint64_t seed = 1;

  TestFunction draw(int i) const;
};

struct QuadratureSpec {
  int base_cells = 16;        // cells per axis at the base level
  int max_refine_levels = 12; // dyadic subdivision depth near singular sets
  int time_cells = 17;
  double rel_tol = 0.005;     // stop refining once the result moves < 0.5%
  double min_scale = 1e-5;    // do not split cells below this size
};

struct JitterStats {
  long count = 0;
  double magnitude = 0;
};

/// Rayleigh quotient of the form-bound inequality for one test function:
///   ( int int |b phi|^2 - int g(t) ||phi(t,.)||_2^2 dt ) / int int |grad phi|^2,
/// computed by tensorized midpoint quadrature on the support of phi, with
/// dyadic refinement toward the singular locus and the test-function core.
double rayleigh_quotient(const DriftField& field, const TestFunction& phi,
                         const GFunction& g, const QuadratureSpec& spec = {},
                         JitterStats* jitter = nullptr);

/// max of rayleigh_quotient over `budget` draws from the family, using the
/// field's certificate g when present (g = 0 otherwise).  Throws
/// DegenerateTest only if every candidate degenerates.
double estimate_form_bound(const DriftField& field,
                           const TestFunctionFamily& family, int budget,
                           const QuadratureSpec& spec = {});

/// Deterministic cube sampler for the Morrey seminorm: the first draws are
/// locus-centered dyadic cubes, the rest are seeded uniform draws.
struct CubeSampler {
  int d = 3;
  Vec domain_center;
  double domain_halfwidth = 2.0;
  double min_side = 0.05;
  double max_side = 2.0;
  std::uint64_t seed = 1;
  std::pair<Vec, double> draw(int i, const SingularLocus& locus) const;
};

/// max over sampled cubes Q of l(Q)^2 (avg_Q |b|^{2s})^{1/s}; a heuristic
/// estimate of the Campanato-Morrey constant c_s.
double morrey_seminorm(const DriftField& field, double s,
                       const CubeSampler& sampler, int n_cubes,
                       const QuadratureSpec& spec = {});

}  // namespace driftlab
