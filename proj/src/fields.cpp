#include "driftlab/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "driftlab/rng.hpp"

namespace driftlab {

// ---------------------------------------------------------------------------
// GFunction
// ---------------------------------------------------------------------------

GFunction GFunction::constant(double c) {
  if (c < 0) throw InvalidParameter("g must be nonnegative");
  GFunction f;
  f.kind_ = Kind::Constant;
  f.amp_ = c;
  return f;
}

GFunction GFunction::power(double amp, double t0, double alpha) {
  if (amp < 0 || alpha <= 0 || alpha >= 1)
    throw InvalidParameter("power g needs amp >= 0 and alpha in (0,1)");
  GFunction f;
  f.kind_ = Kind::Power;
  f.amp_ = amp;
  f.t0_ = t0;
  f.alpha_ = alpha;
  return f;
}

namespace {
double log_power_g(double amp, double t0, double gamma, double t) {
  const double u = std::abs(t - t0);
  if (u == 0) return 0;  // integrable singularity; value at the tip unused
  return amp / u * std::pow(std::log(std::exp(1.0) + 1.0 / u), -1.0 - gamma);
}
}  // namespace

GFunction GFunction::log_power(double amp, double t0, double gamma,
                               double t_max) {
  if (amp < 0 || gamma <= 0 || t_max <= 0)
    throw InvalidParameter("log_power g needs amp >= 0, gamma > 0, t_max > 0");
  GFunction f;
  f.kind_ = Kind::LogPower;
  f.amp_ = amp;
  f.t0_ = t0;
  f.gamma_ = gamma;

  // Graded nodes: uniform backbone plus dyadic refinement toward t0.
  std::vector<double> nodes;
  const int uniform = 512;
  for (int i = 0; i <= uniform; ++i) nodes.push_back(t_max * i / uniform);
  for (int k = 1; k <= 48; ++k) {
    const double h = t_max * std::pow(0.5, k);
    for (double s : {t0 - h, t0 + h})
      if (s > 0 && s < t_max) nodes.push_back(s);
  }
  nodes.push_back(std::clamp(t0, 0.0, t_max));
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto table = std::make_shared<std::vector<std::pair<double, double>>>();
  table->reserve(nodes.size());
  double acc = 0;
  double prev = nodes.front();
  table->push_back({prev, 0.0});
  for (size_t i = 1; i < nodes.size(); ++i) {
    const double a = prev, b = nodes[i];
    const double mid = 0.5 * (a + b);
    acc += log_power_g(amp, t0, gamma, mid) * (b - a);
    table->push_back({b, acc});
    prev = b;
  }
  f.table_ = table;
  return f;
}

GFunction GFunction::weighted_sum(double c1, const GFunction& g1, double c2,
                                  const GFunction& g2) {
  if (c1 < 0 || c2 < 0) throw InvalidParameter("sum weights must be >= 0");
  if (g1.is_zero() && g2.is_zero()) return zero();
  GFunction f;
  f.kind_ = Kind::Sum;
  if (!g1.is_zero() && c1 > 0)
    f.terms_.push_back({c1, std::make_shared<GFunction>(g1)});
  if (!g2.is_zero() && c2 > 0)
    f.terms_.push_back({c2, std::make_shared<GFunction>(g2)});
  if (f.terms_.empty()) return zero();
  return f;
}

double GFunction::g(double t) const {
  switch (kind_) {
    case Kind::Zero:
      return 0;
    case Kind::Constant:
      return amp_;
    case Kind::Power: {
      const double u = std::abs(t - t0_);
      return u == 0 ? 0 : amp_ * std::pow(u, -alpha_);
    }
    case Kind::LogPower:
      return log_power_g(amp_, t0_, gamma_, t);
    case Kind::Sum: {
      double s = 0;
      for (const auto& [c, gi] : terms_) s += c * gi->g(t);
      return s;
    }
  }
  return 0;
}

double GFunction::G(double t) const {
  if (t <= 0) return 0;
  switch (kind_) {
    case Kind::Zero:
      return 0;
    case Kind::Constant:
      return amp_ * t;
    case Kind::Power: {
      const double e = 1.0 - alpha_;
      auto prim = [&](double s) {
        // antiderivative of |s - t0|^{-alpha} with value 0 at s = 0
        if (t0_ <= 0) return std::pow(s - t0_, e) / e - std::pow(-t0_, e) / e;
        if (s <= t0_)
          return (std::pow(t0_, e) - std::pow(t0_ - s, e)) / e;
        return (std::pow(t0_, e) + std::pow(s - t0_, e)) / e;
      };
      return amp_ * prim(t);
    }
    case Kind::LogPower: {
      const auto& tab = *table_;
      if (t >= tab.back().first) return tab.back().second;
      auto it = std::lower_bound(
          tab.begin(), tab.end(), t,
          [](const std::pair<double, double>& p, double x) { return p.first < x; });
      if (it == tab.begin()) return 0;
      const auto [tb, Gb] = *it;
      const auto [ta, Ga] = *(it - 1);
      const double w = (tb == ta) ? 0.0 : (t - ta) / (tb - ta);
      return Ga + w * (Gb - Ga);
    }
    case Kind::Sum: {
      double s = 0;
      for (const auto& [c, gi] : terms_) s += c * gi->G(t);
      return s;
    }
  }
  return 0;
}

double GFunction::max_window_integral(double h, double T) const {
  if (h <= 0) return 0;
  if (h >= T) return G(T);
  if (is_zero()) return 0;
  double best = 0;
  const int n = 512;
  for (int i = 0; i <= n; ++i) {
    const double s = (T - h) * i / n;
    best = std::max(best, G(s + h) - G(s));
  }
  return best;
}

std::string GFunction::kind_name() const {
  switch (kind_) {
    case Kind::Zero:
      return "zero";
    case Kind::Constant:
      return "constant";
    case Kind::Power:
      return "power";
    case Kind::LogPower:
      return "log-power";
    case Kind::Sum:
      return "sum";
  }
  return "?";
}

std::vector<double> GFunction::params() const {
  switch (kind_) {
    case Kind::Zero:
      return {};
    case Kind::Constant:
      return {amp_};
    case Kind::Power:
      return {amp_, t0_, alpha_};
    case Kind::LogPower:
      return {amp_, t0_, gamma_};
    case Kind::Sum: {
      std::vector<double> out;
      for (const auto& [c, gi] : terms_) out.push_back(c);
      return out;
    }
  }
  return {};
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Hardy:
      return "hardy";
    case Provenance::StrichartzWeakLd:
      return "strichartz-weak-Ld";
    case Provenance::HolderSobolevLd:
      return "hoelder-sobolev-Ld";
    case Provenance::YoungLps:
      return "young-lps";
    case Provenance::MorreyHeuristic:
      return "morrey-heuristic";
    case Provenance::NumericEstimate:
      return "numeric-estimate";
    case Provenance::SumRule:
      return "sum-rule";
  }
  return "?";
}

std::map<std::string, std::string> FormBoundCertificate::record() const {
  std::map<std::string, std::string> rec;
  std::ostringstream d;
  d.precision(17);
  d << delta;
  rec["delta"] = d.str();
  rec["g_kind"] = g.kind_name();
  std::ostringstream ps;
  ps.precision(17);
  bool first = true;
  for (double p : g.params()) {
    if (!first) ps << ",";
    ps << p;
    first = false;
  }
  rec["g_params"] = ps.str();
  rec["provenance"] = provenance_name(provenance);
  return rec;
}

// ---------------------------------------------------------------------------
// SingularLocus
// ---------------------------------------------------------------------------

SingularLocus SingularLocus::point(const Vec& p) {
  SingularLocus l;
  l.parts.push_back({Kind::Point, p, 0, 0});
  return l;
}
SingularLocus SingularLocus::sphere(const Vec& c, double radius) {
  SingularLocus l;
  l.parts.push_back({Kind::Sphere, c, radius, 0});
  return l;
}
SingularLocus SingularLocus::time_line(double t0) {
  SingularLocus l;
  l.parts.push_back({Kind::TimeLine, Vec{}, 0, t0});
  return l;
}

bool SingularLocus::contains(double t, const Vec& x, double tol) const {
  for (const auto& p : parts) {
    switch (p.kind) {
      case Kind::Point:
        if ((x - p.center).norm() <= tol) return true;
        break;
      case Kind::Sphere:
        if (std::abs((x - p.center).norm() - p.radius) <= tol) return true;
        break;
      case Kind::TimeLine:
        if (std::abs(t - p.t0) <= tol) return true;
        break;
    }
  }
  return false;
}

double SingularLocus::space_distance(const Vec& x) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : parts) {
    if (p.kind == Kind::Point)
      best = std::min(best, (x - p.center).norm());
    else if (p.kind == Kind::Sphere)
      best = std::min(best, std::abs((x - p.center).norm() - p.radius));
  }
  return best;
}

double SingularLocus::time_distance(double t) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : parts)
    if (p.kind == Kind::TimeLine) best = std::min(best, std::abs(t - p.t0));
  return best;
}

void SingularLocus::merge(const SingularLocus& other) {
  parts.insert(parts.end(), other.parts.begin(), other.parts.end());
}

Vec eval_drift(const DriftField& field, double t, const Vec& x) {
  if (x.d != field.dim())
    throw DimensionMismatch("point dimension does not match field");
  if (field.locus().contains(t, x))
    throw SingularSample("sample lies on the singular locus of " + field.id());
  Vec out = field.value(t, x);
  for (int i = 0; i < out.d; ++i)
    if (!std::isfinite(out[i]))
      throw SingularSample("non-finite drift value from " + field.id());
  return out;
}

// ---------------------------------------------------------------------------
// Concrete fields
// ---------------------------------------------------------------------------

namespace {

class ZeroField final : public DriftField {
 public:
  explicit ZeroField(int d) : DriftField(d, "zero") {
    bounded_smooth_ = true;
    sup_bound_ = 0;
    cert_ = FormBoundCertificate{0.0, GFunction::zero(), Provenance::Hardy};
  }
  void value(double, const Vec&, Vec& out) const override {
    out = Vec::zero(d_);
  }
};

class HardyField final : public DriftField {
 public:
  HardyField(int d, double delta, int sign, TimeModulation kappa)
      : DriftField(d, "hardy"), kappa_(kappa) {
    if (delta <= 0) throw InvalidParameter("hardy drift needs delta > 0");
    if (sign != 1 && sign != -1) throw InvalidParameter("sign must be +-1");
    if (std::abs(kappa.amplitude) > 1.0 + 1e-15)
      throw InvalidParameter("|kappa| must be <= 1");
    coef_ = sign * std::sqrt(delta) * 0.5 * (d - 2);
    locus_ = SingularLocus::point(Vec::zero(d));
    cert_ = FormBoundCertificate{delta, GFunction::zero(), Provenance::Hardy};
    time_dependent_ = kappa.kind != TimeModulation::Kind::One;
  }
  void value(double t, const Vec& x, Vec& out) const override {
    const double r2 = x.norm2();
    const double c = coef_ * kappa_(t) / r2;
    out = Vec(d_);
    for (int i = 0; i < d_; ++i) out[i] = c * x[i];
  }

 private:
  double coef_;
  TimeModulation kappa_;
};

class ShellLogField final : public DriftField {
 public:
  ShellLogField(double C, double a, double c, int d)
      : DriftField(d, "shell-log"), C_(C), a_(a), c_(c) {
    if (C <= 0 || a <= 0 || a >= 1 || c <= 1)
      throw InvalidParameter("shell-log needs C > 0, a in (0,1), c > 1");
    locus_ = SingularLocus::sphere(Vec::zero(d), 1.0);
  }
  void value(double, const Vec& x, Vec& out) const override {
    out = Vec::zero(d_);
    const double r = x.norm();
    const double w = std::abs(r - 1.0);
    if (w >= a_ || r == 0) return;
    const double mag2 = C_ / (w * std::pow(-std::log(w), c_));
    const double m = std::sqrt(mag2) / r;
    for (int i = 0; i < d_; ++i) out[i] = m * x[i];
  }

 private:
  double C_, a_, c_;
};

class WeakLdField final : public DriftField {
 public:
  WeakLdField(int d, double coef) : DriftField(d, "weak-ld"), coef_(coef) {
    if (coef <= 0) throw InvalidParameter("weak-ld drift needs coef > 0");
    locus_ = SingularLocus::point(Vec::zero(d));
    // ||b||_{d,w} for |b| = coef/|x| is coef * V_d^{1/d}; the two volume
    // factors cancel in the certificate.
    const double norm = coef * std::pow(unit_ball_volume(d), 1.0 / d);
    cert_ = FormBoundCertificate{strichartz_delta(norm, d), GFunction::zero(),
                                 Provenance::StrichartzWeakLd};
  }
  void value(double, const Vec& x, Vec& out) const override {
    const double c = coef_ / x.norm2();
    out = Vec(d_);
    for (int i = 0; i < d_; ++i) out[i] = c * x[i];
  }

 private:
  double coef_;
};

class LpsField final : public DriftField {
 public:
  LpsField(int d, const LpsParams& p) : DriftField(d, "lps"), p_(p) {
    if (p.q <= d) throw InvalidParameter("lps needs spatial exponent q > d");
    if (p.nu * p.q >= d)
      throw InvalidParameter("lps needs nu*q < d for the L^q profile");
    p_t_ = 2.0 / (1.0 - d / p.q);
    if (p.sigma * p_t_ >= 1.0)
      throw InvalidParameter("lps needs sigma*p < 1 for local integrability");
    locus_ = SingularLocus::point(Vec::zero(d));
    locus_.merge(SingularLocus::time_line(p.t0));
    time_dependent_ = true;

    // ||u||_q^q = S_{d-1} R^{d - nu q} / (d - nu q)
    const double uq =
        std::pow(unit_sphere_area(d) * std::pow(p.R, d - p.nu * p.q) /
                     (d - p.nu * p.q),
                 1.0 / p.q);
    const double delta =
        sharp_sobolev_constant(d) * (1.0 + p.eps) * (d / p.q) * (d / p.q);
    const double gamp = (1.0 + 1.0 / p.eps) * std::pow(2.0 / p_t_, 2) *
                        std::pow(p.amp * uq, p_t_);
    cert_ = FormBoundCertificate{
        delta, GFunction::power(gamp, p.t0, p.sigma * p_t_),
        Provenance::YoungLps};
  }
  void value(double t, const Vec& x, Vec& out) const override {
    out = Vec::zero(d_);
    const double r = x.norm();
    if (r > p_.R || r == 0) return;
    const double a = p_.amp * std::pow(std::abs(t - p_.t0), -p_.sigma);
    const double m = a * std::pow(r, -p_.nu) / r;
    for (int i = 0; i < d_; ++i) out[i] = m * x[i];
  }

 private:
  LpsParams p_;
  double p_t_;
};

class HardyTimeField final : public DriftField {
 public:
  HardyTimeField(int d, double delta, int sign, double omega,
                 double tsing_amp, double t0, double gamma, double t_max)
      : DriftField(d, "hardy-time"),
        kappa_(TimeModulation::cosine(1.0, omega)),
        tsing_amp_(tsing_amp),
        t0_(t0),
        gamma_(gamma) {
    if (delta <= 0) throw InvalidParameter("hardy-time needs delta > 0");
    if (tsing_amp < 0) throw InvalidParameter("tsing_amp must be >= 0");
    coef_ = sign * std::sqrt(delta) * 0.5 * (d - 2);
    locus_ = SingularLocus::point(Vec::zero(d));
    time_dependent_ = true;
    GFunction g = GFunction::zero();
    if (tsing_amp > 0) {
      locus_.merge(SingularLocus::time_line(t0));
      // The uniform component has delta = 0; the eta-weighted split puts
      // its squared amplitude into g.
      const double eta = 1e-3;
      g = GFunction::weighted_sum(
          1.0 + 1.0 / eta,
          GFunction::log_power(tsing_amp * tsing_amp, t0, gamma, t_max), 0.0,
          GFunction::zero());
    }
    cert_ = FormBoundCertificate{delta, g, Provenance::SumRule};
  }
  void value(double t, const Vec& x, Vec& out) const override {
    const double c = coef_ * kappa_(t) / x.norm2();
    out = Vec(d_);
    for (int i = 0; i < d_; ++i) out[i] = c * x[i];
    if (tsing_amp_ > 0) {
      const double u = std::abs(t - t0_);
      if (u > 0) {
        const double a2 = tsing_amp_ * tsing_amp_ / u *
                          std::pow(std::log(std::exp(1.0) + 1.0 / u),
                                   -1.0 - gamma_);
        out[0] += std::sqrt(a2);
      }
    }
  }

 private:
  double coef_;
  TimeModulation kappa_;
  double tsing_amp_, t0_, gamma_;
};

class SumField final : public DriftField {
 public:
  SumField(FieldPtr a, FieldPtr b)
      : DriftField(a->dim(), "sum:" + a->id() + "+" + b->id()),
        a_(std::move(a)),
        b_(std::move(b)) {
    locus_ = a_->locus();
    locus_.merge(b_->locus());
    time_dependent_ = a_->time_dependent() || b_->time_dependent();
    bounded_smooth_ = a_->bounded_smooth() && b_->bounded_smooth();
    if (bounded_smooth_) sup_bound_ = a_->sup_bound() + b_->sup_bound();
    if (a_->certificate() && b_->certificate()) {
      const auto& ca = *a_->certificate();
      const auto& cb = *b_->certificate();
      const double sd = std::sqrt(ca.delta) + std::sqrt(cb.delta);
      double wa, wb;
      if (ca.delta > 0 && cb.delta > 0) {
        const double t = std::sqrt(cb.delta / ca.delta);
        wa = 1.0 + t;
        wb = 1.0 + 1.0 / t;
      } else {
        // One (or both) deltas vanish: fixed eta-split, eta = 1e-3, with the
        // large weight on the zero-delta side.
        const double eta = 1e-3;
        if (ca.delta == 0 && cb.delta == 0) {
          wa = wb = 2.0;
        } else if (ca.delta == 0) {
          wa = 1.0 + 1.0 / eta;
          wb = 1.0 + eta;
        } else {
          wa = 1.0 + eta;
          wb = 1.0 + 1.0 / eta;
        }
      }
      cert_ = FormBoundCertificate{
          sd * sd, GFunction::weighted_sum(wa, ca.g, wb, cb.g),
          Provenance::SumRule};
    }
  }
  void value(double t, const Vec& x, Vec& out) const override {
    Vec tmp(d_);
    a_->value(t, x, out);
    b_->value(t, x, tmp);
    out += tmp;
  }

 private:
  FieldPtr a_, b_;
};

class AnalyticField final : public DriftField {
 public:
  AnalyticField(int d, std::function<void(double, const Vec&, Vec&)> fn,
                double sup_bound, bool time_dependent, std::string id)
      : DriftField(d, std::move(id)), fn_(std::move(fn)) {
    bounded_smooth_ = true;
    sup_bound_ = sup_bound;
    time_dependent_ = time_dependent;
  }
  void value(double t, const Vec& x, Vec& out) const override {
    out = Vec::zero(d_);
    fn_(t, x, out);
  }

 private:
  std::function<void(double, const Vec&, Vec&)> fn_;
};

class RecertifiedField final : public DriftField {
 public:
  RecertifiedField(FieldPtr base, FormBoundCertificate cert)
      : DriftField(base->dim(), base->id()), base_(std::move(base)) {
    locus_ = base_->locus();
    bounded_smooth_ = base_->bounded_smooth();
    sup_bound_ = base_->sup_bound();
    time_dependent_ = base_->time_dependent();
    cert_ = std::move(cert);
  }
  void value(double t, const Vec& x, Vec& out) const override {
    base_->value(t, x, out);
  }

 private:
  FieldPtr base_;
};

}  // namespace

FieldPtr make_zero_field(int d) { return std::make_shared<ZeroField>(d); }

FieldPtr make_hardy_drift(int d, double delta, int sign,
                          TimeModulation kappa) {
  return std::make_shared<HardyField>(d, delta, sign, kappa);
}

FieldPtr make_shell_log_drift(double C, double a, double c, int d) {
  return std::make_shared<ShellLogField>(C, a, c, d);
}

FieldPtr make_weak_ld_drift(int d, double coef) {
  return std::make_shared<WeakLdField>(d, coef);
}

FieldPtr make_lps_drift(int d, const LpsParams& p) {
  return std::make_shared<LpsField>(d, p);
}

FieldPtr make_hardy_time_drift(int d, double delta, int sign, double omega,
                               double tsing_amp, double t0, double gamma,
                               double t_max) {
  return std::make_shared<HardyTimeField>(d, delta, sign, omega, tsing_amp,
                                          t0, gamma, t_max);
}

FieldPtr sum_fields(const FieldPtr& b1, const FieldPtr& b2) {
  if (!b1 || !b2) throw InvalidParameter("sum_fields: null field");
  if (b1->dim() != b2->dim())
    throw DimensionMismatch("sum_fields: dimensions differ");
  return std::make_shared<SumField>(b1, b2);
}

FieldPtr make_bounded_field(int d,
                            std::function<void(double, const Vec&, Vec&)> fn,
                            double sup_bound, bool time_dependent,
                            std::string id) {
  return std::make_shared<AnalyticField>(d, std::move(fn), sup_bound,
                                         time_dependent, std::move(id));
}

FieldPtr with_certificate(const FieldPtr& f, FormBoundCertificate cert) {
  return std::make_shared<RecertifiedField>(f, std::move(cert));
}

namespace {
double get_param(const std::map<std::string, double>& p, const std::string& k,
                 double dflt) {
  auto it = p.find(k);
  return it == p.end() ? dflt : it->second;
}
}  // namespace

FieldPtr make_field(const std::string& catalog_id,
                    const std::map<std::string, double>& params) {
  const int d = static_cast<int>(get_param(params, "d", 3));
  if (catalog_id == "zero") return make_zero_field(d);
  if (catalog_id == "hardy")
    return make_hardy_drift(d, get_param(params, "delta", 0.04),
                            static_cast<int>(get_param(params, "sign", 1)));
  if (catalog_id == "hardy-time")
    return make_hardy_time_drift(
        d, get_param(params, "delta", 0.04),
        static_cast<int>(get_param(params, "sign", 1)),
        get_param(params, "omega", 2.0 * M_PI),
        get_param(params, "tsing_amp", 0.2), get_param(params, "t0", 0.35),
        get_param(params, "gamma", 1.0));
  if (catalog_id == "shell-log")
    return make_shell_log_drift(get_param(params, "C", 1.0),
                                get_param(params, "a", 0.5),
                                get_param(params, "c", 2.0), d);
  if (catalog_id == "lps") {
    LpsParams p;
    p.amp = get_param(params, "amp", p.amp);
    p.nu = get_param(params, "nu", p.nu);
    p.R = get_param(params, "R", p.R);
    p.t0 = get_param(params, "t0", p.t0);
    p.sigma = get_param(params, "sigma", p.sigma);
    p.q = get_param(params, "q", p.q);
    p.eps = get_param(params, "eps", p.eps);
    return make_lps_drift(d, p);
  }
  if (catalog_id == "weak-ld")
    return make_weak_ld_drift(d, get_param(params, "coef", 0.1));
  if (catalog_id.rfind("sum:", 0) == 0) {
    const std::string rest = catalog_id.substr(4);
    const auto plus = rest.find('+');
    if (plus == std::string::npos)
      throw ConfigInvalid("sum field id must be sum:<id>+<id>");
    return sum_fields(make_field(rest.substr(0, plus), params),
                      make_field(rest.substr(plus + 1), params));
  }
  throw ConfigInvalid("unknown field id '" + catalog_id + "'");
}

// ---------------------------------------------------------------------------
// Dimension constants
// ---------------------------------------------------------------------------

double unit_ball_volume(int d) {
  return std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

double unit_sphere_area(int d) { return d * unit_ball_volume(d); }

double sharp_sobolev_constant(int d) {
  if (d < 3) throw InvalidParameter("Sobolev constant needs d >= 3");
  const double ct = std::pow(std::tgamma(d) / std::tgamma(0.5 * d), 1.0 / d) /
                    std::sqrt(M_PI * d * (d - 2));
  return ct * ct;
}

double strichartz_delta(double weak_ld_norm, int d) {
  if (weak_ld_norm < 0 || d < 3)
    throw InvalidParameter("strichartz_delta needs norm >= 0, d >= 3");
  const double s = weak_ld_norm * std::pow(unit_ball_volume(d), -1.0 / d) *
                   2.0 / (d - 2);
  return s * s;
}

StrichartzReadings strichartz_delta_readings(double weak_ld_norm, int d) {
  StrichartzReadings r{};
  r.omega_standard = unit_ball_volume(d);
  r.omega_alt = std::pow(M_PI, 0.5 * d) * std::tgamma(0.5 * d + 1.0);
  const double f = weak_ld_norm * 2.0 / (d - 2);
  const double s1 = f * std::pow(r.omega_standard, -1.0 / d);
  const double s2 = f * std::pow(r.omega_alt, -1.0 / d);
  r.delta_standard = s1 * s1;
  r.delta_alt = s2 * s2;
  return r;
}

std::pair<double, double> admissible_q_interval(int d, double delta) {
  if (delta <= 0)
    return {static_cast<double>(d), std::numeric_limits<double>::infinity()};
  return {static_cast<double>(d), 1.0 / std::sqrt(delta)};
}

bool q_admissible(int d, double delta, double q) {
  const auto [lo, hi] = admissible_q_interval(d, delta);
  return q > lo && q < hi;
}

double contraction_p_lower(double delta) {
  if (delta < 0 || delta >= 4)
    throw POutOfRange("contraction interval needs 0 <= delta < 4");
  return 2.0 / (2.0 - std::sqrt(delta));
}

// ---------------------------------------------------------------------------
// TestFunction
// ---------------------------------------------------------------------------

TestFunction::TestFunction(int d, double tc, Vec xc, double r, double tau,
                           double eta, double mu, double steep,
                           double steep_t)
    : d_(d),
      tc_(tc),
      xc_(std::move(xc)),
      r_(r),
      tau_(tau),
      eta_(eta),
      mu_(mu),
      steep_(steep),
      steep_t_(steep_t) {
  if (r <= 0 || tau <= 0) throw InvalidParameter("test function needs r, tau > 0");
  if (eta < 0 || steep <= 0 || steep_t <= 0)
    throw InvalidParameter("test function shape parameters out of range");
  if (eta > 0 && mu <= 0)
    throw InvalidParameter("power-core test function needs mu > 0");
  if (xc_.d != d) throw DimensionMismatch("test function center dimension");
}

namespace {
inline double cutoff(double u2, double steep) {
  // exp(steep * (1 - 1/(1-u^2))) for u^2 < 1, else 0.
  if (u2 >= 1.0) return 0.0;
  return std::exp(steep * (1.0 - 1.0 / (1.0 - u2)));
}
}  // namespace

double TestFunction::time_factor(double t) const {
  const double u = (t - tc_) / tau_;
  return cutoff(u * u, steep_t_);
}

double TestFunction::space_factor(const Vec& x) const {
  const Vec y = x - xc_;
  const double rho2 = y.norm2() / (r_ * r_);
  const double c = cutoff(rho2, steep_);
  if (c == 0.0) return 0.0;
  double core = 1.0;
  if (eta_ > 0)
    core = std::pow((mu_ * mu_ + rho2) / (mu_ * mu_ + 1.0), -0.5 * eta_);
  return core * c;
}

void TestFunction::space_gradient(const Vec& x, Vec& out) const {
  out = Vec::zero(d_);
  const Vec y = x - xc_;
  const double rho2 = y.norm2() / (r_ * r_);
  if (rho2 >= 1.0) return;
  const double val = space_factor(x);
  // d/d(rho^2) of log psi, times 2/r^2 * y  (chain rule through rho^2).
  const double om = 1.0 - rho2;
  double dlog = -steep_ / (om * om);
  if (eta_ > 0) dlog += -0.5 * eta_ / (mu_ * mu_ + rho2);
  const double scale = val * dlog / (r_ * r_);
  for (int i = 0; i < d_; ++i) out[i] = 2.0 * scale * y[i];
}

void TestFunction::gradient(double t, const Vec& x, Vec& out) const {
  space_gradient(x, out);
  out *= time_factor(t);
}

bool TestFunction::in_space_support(const Vec& x) const {
  return (x - xc_).norm2() < r_ * r_;
}
bool TestFunction::in_time_support(double t) const {
  return std::abs(t - tc_) < tau_;
}

TestFunction TestFunctionFamily::draw(int i) const {
  const Vec anchor_d = (anchor.d == d) ? anchor : Vec::zero(d);
  switch (pattern) {
    case Pattern::OriginConcentrating: {
      // Shrinking inner-core radius, Hardy-type exponent (d-2)/2, a few
      // outer radii.  Quotients approach the certificate from below as the
      // core shrinks.
      static constexpr double kRadii[] = {1.0, 0.5, 2.0};
      const double r = base_radius * kRadii[i % 3];
      const double mu = 0.3 * std::pow(0.5, i / 3);
      return TestFunction(d, time_center, anchor_d, r, time_radius,
                          0.5 * (d - 2), std::max(mu, 2e-4));
    }
    case Pattern::ShellProbing: {
      // Centers on the sphere, radii below the shell half-width.
      Vec c = anchor_d;
      const double ang = 2.399963229728653 * i;  // golden-angle sweep
      c[0] += sphere_radius * std::cos(ang);
      c[1] += sphere_radius * std::sin(ang);
      const double r = base_radius * std::pow(0.7, i % 6);
      return TestFunction(d, time_center, c, r, time_radius, 0.0, 0.1);
    }
    case Pattern::Generic:
    default: {
      NormalStream s(seed, static_cast<std::uint64_t>(i));
      Vec c = anchor_d;
      for (int k = 0; k < d; ++k)
        c[k] += base_radius * (s.next_uniform() - 0.5);
      const double r = base_radius * (0.3 + 0.7 * s.next_uniform());
      const double tc = time_center + time_radius * (s.next_uniform() - 0.5);
      return TestFunction(d, tc, c, r, time_radius);
    }
  }
}

}  // namespace driftlab
