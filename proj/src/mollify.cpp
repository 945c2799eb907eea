#include "driftlab/mollify.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace driftlab {

namespace {
std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

std::map<std::string, std::string> MollifierSchedule::record() const {
  return {{"m", std::to_string(m)},      {"eps_m", fmt(eps_m)},
          {"gamma_m", fmt(gamma_m)},     {"c_m", fmt(c_m)},
          {"delta_m", fmt(delta_m)},     {"C_S", fmt(C_S)},
          {"r", std::to_string(r)}};
}

// ---------------------------------------------------------------------------
// TruncatedField
// ---------------------------------------------------------------------------

TruncatedField::TruncatedField(FieldPtr source, int m)
    : DriftField(source->dim(), source->id() + "|trunc" + std::to_string(m)),
      source_(std::move(source)),
      m_(m) {
  if (m < 1) throw InvalidParameter("truncation level must be >= 1");
  bounded_smooth_ = true;
  sup_bound_ = m;
  time_dependent_ = true;  // the time window makes every cutoff time-dependent
  cert_ = source_->certificate();
}

void TruncatedField::spatial_value(const Vec& x, Vec& out) const {
  out = Vec::zero(d_);
  if (x.norm() > m_) return;
  if (source_->locus().contains(0.0, x)) return;  // |b| = inf there
  Vec v(d_);
  source_->value(0.0, x, v);
  double n2 = v.norm2();
  if (!std::isfinite(n2) || n2 > static_cast<double>(m_) * m_) return;
  out = v;
}

void TruncatedField::value(double t, const Vec& x, Vec& out) const {
  out = Vec::zero(d_);
  if (t < 0 || t > m_) return;
  if (static_core()) {
    spatial_value(x, out);
    return;
  }
  if (x.norm() > m_) return;
  if (source_->locus().contains(t, x)) return;
  Vec v(d_);
  source_->value(t, x, v);
  double n2 = v.norm2();
  if (!std::isfinite(n2) || n2 > static_cast<double>(m_) * m_) return;
  out = v;
}

FieldPtr truncate(const FieldPtr& field, int m) {
  if (!field) throw InvalidParameter("truncate: null field");
  return std::make_shared<TruncatedField>(field, m);
}

// ---------------------------------------------------------------------------
// MollifiedField
// ---------------------------------------------------------------------------

MollifiedField::MollifiedField(std::shared_ptr<const TruncatedField> truncated,
                               SpatialLattice smoothed, double eps, double c,
                               MollifierSchedule sched)
    : DriftField(truncated->dim(),
                 truncated->source().id() + "|m" + std::to_string(sched.m)),
      truncated_(std::move(truncated)),
      lattice_(std::move(smoothed)),
      static_core_(true),
      eps_(eps),
      c_(c),
      sched_(sched),
      source_locus_(truncated_->source_locus()) {
  bounded_smooth_ = true;
  sup_bound_ = c_ * static_cast<double>(sched_.m);
  time_dependent_ = true;
  cert_ = truncated_->certificate();
}

MollifiedField::MollifiedField(std::shared_ptr<const TruncatedField> truncated,
                               std::vector<SpatialLattice> time_slabs,
                               Axis time_axis, double eps, double c,
                               MollifierSchedule sched)
    : DriftField(truncated->dim(),
                 truncated->source().id() + "|m" + std::to_string(sched.m)),
      truncated_(std::move(truncated)),
      slabs_(std::move(time_slabs)),
      time_axis_(time_axis),
      static_core_(false),
      eps_(eps),
      c_(c),
      sched_(sched),
      source_locus_(truncated_->source_locus()) {
  bounded_smooth_ = true;
  sup_bound_ = c_ * static_cast<double>(sched_.m);
  time_dependent_ = true;
  cert_ = truncated_->certificate();
}

void MollifiedField::spatial_base(const Vec& x, Vec& out) const {
  out = Vec::zero(d_);
  if (!static_core_) return;
  if (lattice_.inside(x)) {
    lattice_.interp(x, out.v.data());
    return;
  }
  truncated_->spatial_value(x, out);
}

double MollifiedField::time_weight(double t) const {
  if (!static_core_) return c_;
  if (eps_ <= 0) return (t >= 0 && t <= sched_.m) ? c_ : 0.0;
  const double s = 2.0 * std::sqrt(eps_);
  return 0.5 * c_ * (std::erf(t / s) - std::erf((t - sched_.m) / s));
}

void MollifiedField::value(double t, const Vec& x, Vec& out) const {
  out = Vec::zero(d_);
  if (static_core_) {
    const double w = time_weight(t);
    if (w == 0.0) return;
    if (lattice_.inside(x)) {
      lattice_.interp(x, out.v.data());
      out *= w;
    } else {
      // Off-lattice far field: the spatial smoothing is negligible there.
      truncated_->spatial_value(x, out);
      out *= w;
    }
    return;
  }
  const double t_lo = time_axis_.lo, t_hi = time_axis_.hi();
  if (t >= t_lo && t <= t_hi && !slabs_.empty() && slabs_[0].inside(x)) {
    double s = (t - t_lo) / time_axis_.h;
    double fl = std::floor(s);
    if (fl > time_axis_.n - 2) fl = time_axis_.n - 2;
    const int i0 = static_cast<int>(fl);
    const double w = s - fl;
    Vec a(d_), b(d_);
    slabs_[i0].interp(x, a.v.data());
    slabs_[i0 + 1].interp(x, b.v.data());
    for (int k = 0; k < d_; ++k) out[k] = c_ * ((1 - w) * a[k] + w * b[k]);
    return;
  }
  truncated_->value(t, x, out);
  out *= c_;
}

void MollifiedField::export_block(std::ostream& os) const {
  if (static_core_) {
    write_spatial_lattice(os, lattice_);
    return;
  }
  BlockHeader h;
  h.rank = 4;
  h.ncomp = static_cast<std::uint32_t>(d_);
  h.dims = {static_cast<std::uint64_t>(time_axis_.n),
            static_cast<std::uint64_t>(slabs_[0].axis(2).n),
            static_cast<std::uint64_t>(slabs_[0].axis(1).n),
            static_cast<std::uint64_t>(slabs_[0].axis(0).n)};
  h.origin = {time_axis_.lo, slabs_[0].axis(2).lo, slabs_[0].axis(1).lo,
              slabs_[0].axis(0).lo};
  h.spacing = {time_axis_.h, slabs_[0].axis(2).h, slabs_[0].axis(1).h,
               slabs_[0].axis(0).h};
  std::vector<double> payload;
  const std::size_t n = slabs_[0].nodes();
  payload.reserve(static_cast<std::size_t>(d_) * time_axis_.n * n);
  for (int c = 0; c < d_; ++c)
    for (int it = 0; it < time_axis_.n; ++it) {
      const auto& dat = slabs_[it].data();
      payload.insert(payload.end(), dat.begin() + c * n,
                     dat.begin() + (c + 1) * n);
    }
  write_block(os, h, payload);
}

// ---------------------------------------------------------------------------
// Convolution machinery
// ---------------------------------------------------------------------------

namespace {

std::vector<double> gauss_taps(double eps, double h, double pad_sigmas) {
  const double sigma = std::sqrt(2.0 * eps);
  const int K = static_cast<int>(std::ceil(pad_sigmas * sigma / h));
  std::vector<double> taps(2 * K + 1);
  double sum = 0;
  for (int j = -K; j <= K; ++j) {
    const double w = std::exp(-(j * h) * (j * h) / (4.0 * eps));
    taps[j + K] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

// In-place separable convolution along one axis of a SpatialLattice
// (zero extension beyond the sampled box).
void convolve_axis(SpatialLattice& lat, int axis,
                   const std::vector<double>& taps) {
  const int K = (static_cast<int>(taps.size()) - 1) / 2;
  if (K == 0) return;
  const int nx = lat.axis(0).n, ny = lat.axis(1).n, nz = lat.axis(2).n;
  const int len = lat.axis(axis).n;
  std::vector<double> buf(len);
  for (int comp = 0; comp < lat.ncomp(); ++comp) {
    const int n0 = (axis == 0) ? ny : nx;
    const int n1 = (axis == 2) ? ny : nz;
    for (int a1 = 0; a1 < n1; ++a1) {
      for (int a0 = 0; a0 < n0; ++a0) {
        for (int k = 0; k < len; ++k) {
          int ix = (axis == 0) ? k : a0;
          int iy = (axis == 1) ? k : ((axis == 0) ? a0 : a1);
          int iz = (axis == 2) ? k : a1;
          buf[k] = lat.at(comp, ix, iy, iz);
        }
        for (int k = 0; k < len; ++k) {
          double acc = 0;
          const int jlo = std::max(-K, -k);
          const int jhi = std::min(K, len - 1 - k);
          for (int j = jlo; j <= jhi; ++j) acc += taps[j + K] * buf[k + j];
          int ix = (axis == 0) ? k : a0;
          int iy = (axis == 1) ? k : ((axis == 0) ? a0 : a1);
          int iz = (axis == 2) ? k : a1;
          lat.at(comp, ix, iy, iz) = acc;
        }
      }
    }
  }
}

void convolve_space(SpatialLattice& lat, double eps, double pad_sigmas) {
  if (eps <= 0) return;
  for (int axis = 0; axis < 3; ++axis) {
    const auto taps = gauss_taps(eps, lat.axis(axis).h, pad_sigmas);
    convolve_axis(lat, axis, taps);
  }
}

struct StaticBuild {
  SpatialLattice input;   // padded sampling of the spatial cutoff factor
  SpatialLattice ref;     // cutoff factor on the output box (distance target)
  int crop_lo[3];
  int crop_n[3];
  double box_out = 0;
  double h = 0;
};

StaticBuild sample_static(const TruncatedField& trunc,
                          const MollifyConfig& cfg) {
  StaticBuild sb;
  sb.box_out = std::min(static_cast<double>(trunc.level()), cfg.box_cap);
  sb.h = 2.0 * sb.box_out / cfg.divisions;
  const int padn = static_cast<int>(std::ceil(cfg.pad / sb.h));
  const int n_in = cfg.divisions + 1 + 2 * padn;
  const double lo = -sb.box_out - padn * sb.h;
  Axis ax{lo, sb.h, n_in};
  sb.input = SpatialLattice(ax, ax, ax, trunc.dim());
  Vec x(trunc.dim()), v(trunc.dim());
  for (int iz = 0; iz < n_in; ++iz) {
    x[2] = lo + iz * sb.h;
    for (int iy = 0; iy < n_in; ++iy) {
      x[1] = lo + iy * sb.h;
      for (int ix = 0; ix < n_in; ++ix) {
        x[0] = lo + ix * sb.h;
        trunc.spatial_value(x, v);
        for (int c = 0; c < trunc.dim(); ++c) sb.input.at(c, ix, iy, iz) = v[c];
      }
    }
  }
  for (int a = 0; a < 3; ++a) {
    sb.crop_lo[a] = padn;
    sb.crop_n[a] = cfg.divisions + 1;
  }
  sb.ref = sb.input.crop(sb.crop_lo, sb.crop_n);
  return sb;
}

// Lattice L^3 distance between the smoothed field w(t) * smooth(x) and the
// cutoff 1_[0,m](t) * ref(x), over the output box and the time axis.  The
// mid-window bulk is exact in t; the erf ramps near t = 0 and t = m get a
// short midpoint rule.
double static_distance(const SpatialLattice& smoothed,
                       const SpatialLattice& ref, double eps, int m,
                       double pad_sigmas) {
  const double h = smoothed.axis(0).h;
  const double cell = h * h * h;
  const std::size_t n = smoothed.nodes();
  const int d = smoothed.ncomp();
  const auto& sd = smoothed.data();
  const auto& rd = ref.data();

  auto sum_pow3 = [&](double w, double ind) {
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double m2 = 0;
      for (int c = 0; c < d; ++c) {
        const double diff = w * sd[c * n + i] - ind * rd[c * n + i];
        m2 += diff * diff;
      }
      acc += m2 * std::sqrt(m2);
    }
    return acc * cell;
  };

  const double s = 2.0 * std::sqrt(std::max(eps, 1e-300));
  auto window = [&](double t) {
    if (eps <= 0) return (t >= 0 && t <= m) ? 1.0 : 0.0;
    return 0.5 * (std::erf(t / s) - std::erf((t - m) / s));
  };

  const double pw = std::min(0.5 * m, pad_sigmas * std::sqrt(2.0 * eps) + 1e-12);
  double acc = 0;
  // bulk: t in [pw, m - pw], w ~ 1
  if (m - 2 * pw > 0) acc += (m - 2 * pw) * sum_pow3(1.0, 1.0);
  // ramps at both ends, including the zero-extension overshoot outside [0, m]
  const int nt = 9;
  for (int side = 0; side < 2; ++side) {
    const double a = side == 0 ? -pw : m - pw;
    const double b = side == 0 ? pw : m + pw;
    const double ht = (b - a) / nt;
    for (int i = 0; i < nt; ++i) {
      const double t = a + (i + 0.5) * ht;
      const double ind = (t >= 0 && t <= m) ? 1.0 : 0.0;
      acc += ht * sum_pow3(window(t), ind);
    }
  }
  return std::cbrt(acc);
}

struct TimeDepBuild {
  std::vector<SpatialLattice> slabs;
  std::vector<SpatialLattice> ref;
  Axis taxis_full;
  int crop_lo[3];
  int crop_n[3];
  int t_crop_lo = 0;
  int t_crop_n = 0;
};

TimeDepBuild sample_time_dependent(const TruncatedField& trunc,
                                   const MollifyConfig& cfg) {
  TimeDepBuild tb;
  const double box_out =
      std::min(static_cast<double>(trunc.level()), cfg.box_cap);
  const double h = 2.0 * box_out / cfg.divisions;
  const int padn = static_cast<int>(std::ceil(cfg.pad / h));
  const int n_in = cfg.divisions + 1 + 2 * padn;
  const double lo = -box_out - padn * h;
  Axis ax{lo, h, n_in};

  const double ht = cfg.eval_horizon / cfg.time_divisions;
  const int padt = static_cast<int>(std::ceil(cfg.pad / ht));
  const int nt = cfg.time_divisions + 1 + 2 * padt;
  tb.taxis_full = Axis{-padt * ht, ht, nt};

  Vec x(trunc.dim()), v(trunc.dim());
  tb.slabs.reserve(nt);
  for (int it = 0; it < nt; ++it) {
    const double t = tb.taxis_full.lo + it * ht;
    SpatialLattice slab(ax, ax, ax, trunc.dim());
    for (int iz = 0; iz < n_in; ++iz) {
      x[2] = lo + iz * h;
      for (int iy = 0; iy < n_in; ++iy) {
        x[1] = lo + iy * h;
        for (int ix = 0; ix < n_in; ++ix) {
          x[0] = lo + ix * h;
          trunc.value(t, x, v);
          for (int c = 0; c < trunc.dim(); ++c) slab.at(c, ix, iy, iz) = v[c];
        }
      }
    }
    tb.slabs.push_back(std::move(slab));
  }
  for (int a = 0; a < 3; ++a) {
    tb.crop_lo[a] = padn;
    tb.crop_n[a] = cfg.divisions + 1;
  }
  tb.t_crop_lo = std::max(0, padt - 1);
  tb.t_crop_n = cfg.time_divisions + 1 + 2 * (padt - tb.t_crop_lo);
  tb.ref.reserve(tb.t_crop_n);
  for (int it = 0; it < tb.t_crop_n; ++it)
    tb.ref.push_back(tb.slabs[tb.t_crop_lo + it].crop(tb.crop_lo, tb.crop_n));
  return tb;
}

void convolve_time(std::vector<SpatialLattice>& slabs,
                   const std::vector<double>& taps) {
  const int K = (static_cast<int>(taps.size()) - 1) / 2;
  if (K == 0) return;
  const int nt = static_cast<int>(slabs.size());
  const std::size_t flat = slabs[0].data().size();
  std::vector<double> buf(nt);
  for (std::size_t i = 0; i < flat; ++i) {
    for (int it = 0; it < nt; ++it) buf[it] = slabs[it].data()[i];
    for (int it = 0; it < nt; ++it) {
      double acc = 0;
      const int jlo = std::max(-K, -it);
      const int jhi = std::min(K, nt - 1 - it);
      for (int j = jlo; j <= jhi; ++j) acc += taps[j + K] * buf[it + j];
      slabs[it].data()[i] = acc;
    }
  }
}

double slab_distance(const std::vector<SpatialLattice>& a,
                     const std::vector<SpatialLattice>& b, double ht) {
  double acc = 0;
  const std::size_t n = a[0].nodes();
  const int d = a[0].ncomp();
  const double cell =
      a[0].axis(0).h * a[0].axis(1).h * a[0].axis(2).h * ht;
  for (std::size_t it = 0; it < a.size(); ++it) {
    const auto& ad = a[it].data();
    const auto& bd = b[it].data();
    for (std::size_t i = 0; i < n; ++i) {
      double m2 = 0;
      for (int c = 0; c < d; ++c) {
        const double diff = ad[c * n + i] - bd[c * n + i];
        m2 += diff * diff;
      }
      acc += m2 * std::sqrt(m2) * cell;
    }
  }
  return std::cbrt(acc);
}

}  // namespace

MollifiedPtr heat_smooth(const FieldPtr& bounded_field, double eps,
                         const MollifyConfig& cfg) {
  if (!bounded_field) throw InvalidParameter("heat_smooth: null field");
  if (eps <= 0) throw InvalidParameter("heat_smooth needs eps > 0");
  if (!bounded_field->bounded_smooth())
    throw UnboundedInput("heat_smooth requires a declared sup bound");
  if (bounded_field->dim() != 3)
    throw InvalidParameter("lattice mollification is implemented for d = 3");

  auto trunc = std::dynamic_pointer_cast<const TruncatedField>(bounded_field);
  if (!trunc) {
    // Wrap a bounded field in a generous cutoff so it gains the compact
    // space-time support the convolution lattice needs.
    const int m = static_cast<int>(
        std::ceil(std::max(bounded_field->sup_bound(), cfg.box_cap)));
    trunc = std::make_shared<TruncatedField>(bounded_field, std::max(m, 1));
  }

  MollifierSchedule sched;
  sched.m = trunc->level();
  sched.eps_m = eps;
  sched.c_m = 1.0;
  sched.r = 3;

  if (trunc->static_core()) {
    auto sb = sample_static(*trunc, cfg);
    convolve_space(sb.input, eps, cfg.pad_sigmas);
    SpatialLattice out = sb.input.crop(sb.crop_lo, sb.crop_n);
    return std::make_shared<MollifiedField>(trunc, std::move(out), eps, 1.0,
                                            sched);
  }
  auto tb = sample_time_dependent(*trunc, cfg);
  const auto taps =
      gauss_taps(eps, tb.taxis_full.h, cfg.pad_sigmas);
  for (auto& slab : tb.slabs) convolve_space(slab, eps, cfg.pad_sigmas);
  convolve_time(tb.slabs, taps);
  std::vector<SpatialLattice> cropped;
  cropped.reserve(tb.t_crop_n);
  for (int it = 0; it < tb.t_crop_n; ++it)
    cropped.push_back(tb.slabs[tb.t_crop_lo + it].crop(tb.crop_lo, tb.crop_n));
  Axis taxis{tb.taxis_full.lo + tb.t_crop_lo * tb.taxis_full.h,
             tb.taxis_full.h, tb.t_crop_n};
  return std::make_shared<MollifiedField>(trunc, std::move(cropped), taxis,
                                          eps, 1.0, sched);
}

std::pair<MollifiedPtr, MollifierSchedule> build_approximation(
    const FieldPtr& field, const FormBoundCertificate& cert, int m,
    const GammaRule& gamma_rule, const MollifyConfig& cfg, double eps_cap) {
  if (!field) throw InvalidParameter("build_approximation: null field");
  if (field->dim() != 3)
    throw InvalidParameter("lattice mollification is implemented for d = 3");
  if (m < 1) throw InvalidParameter("level m must be >= 1");
  const double gamma = gamma_rule(m);
  if (gamma <= 0) throw InvalidParameter("gamma_m must be > 0");

  auto trunc = std::make_shared<TruncatedField>(field, m);

  MollifierSchedule sched;
  sched.m = m;
  sched.gamma_m = gamma;
  sched.C_S = sharp_sobolev_constant(field->dim());
  sched.r = field->dim();
  const double sdelta = std::sqrt(cert.delta);
  const double sg = std::sqrt(sched.C_S * gamma * gamma);
  sched.delta_m = (sdelta + sg) * (sdelta + sg);
  sched.c_m = sched.delta_m > 0 ? cert.delta / sched.delta_m : 0.0;

  const double cap =
      std::min(eps_cap, 0.5 * std::pow(cfg.pad / cfg.pad_sigmas, 2));

  if (trunc->static_core()) {
    auto sb = sample_static(*trunc, cfg);

    SpatialLattice work;
    auto distance_at = [&](double eps) {
      work = sb.input;
      convolve_space(work, eps, cfg.pad_sigmas);
      SpatialLattice out = work.crop(sb.crop_lo, sb.crop_n);
      const double dist =
          static_distance(out, sb.ref, eps, m, cfg.pad_sigmas);
      return std::make_pair(dist, std::move(out));
    };

    // Exponential bracket upward from a sub-lattice width, then bisection;
    // the distance grows with eps and vanishes in the eps -> 0 limit.
    double lo = 0.0, hi = 0.0;
    SpatialLattice best;
    bool have_best = false;
    double eps_try = 0.25 * sb.h * sb.h;
    while (true) {
      auto [dist, out] = distance_at(eps_try);
      if (dist <= gamma) {
        lo = eps_try;
        best = std::move(out);
        have_best = true;
        if (eps_try >= cap) break;
        eps_try = std::min(4.0 * eps_try, cap);
      } else {
        hi = eps_try;
        break;
      }
    }
    if (hi > 0) {
      while (hi - lo > 1e-8 && hi / std::max(lo, 1e-300) > 1.3) {
        const double mid = lo > 0 ? std::sqrt(lo * hi) : 0.5 * hi;
        auto [dist, out] = distance_at(mid);
        if (dist <= gamma) {
          lo = mid;
          best = std::move(out);
          have_best = true;
        } else {
          hi = mid;
        }
      }
    }
    if (!have_best)
      throw ScheduleFailure(
          "bisection hit the width floor without meeting gamma (lattice too "
          "coarse)");
    sched.eps_m = lo;
    auto out_field = std::make_shared<MollifiedField>(
        trunc, std::move(best), lo, sched.c_m, sched);
    return {out_field, sched};
  }

  // Time-dependent path: 4-D lattice.
  auto tb = sample_time_dependent(*trunc, cfg);
  auto distance_at = [&](double eps) {
    std::vector<SpatialLattice> work = tb.slabs;
    for (auto& slab : work) convolve_space(slab, eps, cfg.pad_sigmas);
    convolve_time(work, gauss_taps(eps, tb.taxis_full.h, cfg.pad_sigmas));
    std::vector<SpatialLattice> cropped;
    cropped.reserve(tb.t_crop_n);
    for (int it = 0; it < tb.t_crop_n; ++it)
      cropped.push_back(work[tb.t_crop_lo + it].crop(tb.crop_lo, tb.crop_n));
    const double dist = slab_distance(cropped, tb.ref, tb.taxis_full.h);
    return std::make_pair(dist, std::move(cropped));
  };

  double lo = 0.0, hi = 0.0;
  std::vector<SpatialLattice> best;
  bool have_best = false;
  const double hmin = std::min(tb.taxis_full.h, tb.slabs[0].axis(0).h);
  double eps_try = 0.25 * hmin * hmin;
  while (true) {
    auto [dist, out] = distance_at(eps_try);
    if (dist <= gamma) {
      lo = eps_try;
      best = std::move(out);
      have_best = true;
      if (eps_try >= cap) break;
      eps_try = std::min(4.0 * eps_try, cap);
      if (lo == cap) break;
    } else {
      hi = eps_try;
      break;
    }
  }
  if (hi > 0) {
    while (hi - lo > 1e-8 && hi / std::max(lo, 1e-300) > 1.3) {
      const double mid = lo > 0 ? std::sqrt(lo * hi) : 0.5 * hi;
      auto [dist, out] = distance_at(mid);
      if (dist <= gamma) {
        lo = mid;
        best = std::move(out);
        have_best = true;
      } else {
        hi = mid;
      }
    }
  }
  if (!have_best)
    throw ScheduleFailure("gamma_m unreachable on this lattice");
  sched.eps_m = lo;
  Axis taxis{tb.taxis_full.lo + tb.t_crop_lo * tb.taxis_full.h,
             tb.taxis_full.h, tb.t_crop_n};
  auto out_field = std::make_shared<MollifiedField>(
      trunc, std::move(best), taxis, lo, sched.c_m, sched);
  return {out_field, sched};
}

std::vector<std::pair<MollifiedPtr, MollifierSchedule>> build_schedule(
    const FieldPtr& field, const FormBoundCertificate& cert,
    const std::vector<int>& levels, const GammaRule& gamma_rule,
    const MollifyConfig& cfg) {
  std::vector<std::pair<MollifiedPtr, MollifierSchedule>> out;
  double eps_cap = std::numeric_limits<double>::infinity();
  for (int m : levels) {
    auto built = build_approximation(field, cert, m, gamma_rule, cfg, eps_cap);
    eps_cap = 0.99 * built.second.eps_m;  // keep eps_m strictly decreasing
    out.push_back(std::move(built));
  }
  return out;
}

double l2loc_distance(const DriftField& b1, const DriftField& b2,
                      const Region& region, double spacing,
                      int time_samples) {
  if (b1.dim() != b2.dim())
    throw DimensionMismatch("l2loc_distance: dimensions differ");
  const int d = b1.dim();
  if (d != 3) throw InvalidParameter("l2loc_distance is implemented for d = 3");
  int n[3];
  for (int a = 0; a < 3; ++a) {
    n[a] = std::max(1, static_cast<int>(
                           std::round((region.hi[a] - region.lo[a]) / spacing)));
  }
  const double dt = (region.t1 - region.t0) / time_samples;
  double acc = 0;
  Vec x(d), v1(d), v2(d);
  for (int it = 0; it < time_samples; ++it) {
    const double t = region.t0 + (it + 0.5) * dt;
    for (int iz = 0; iz < n[2]; ++iz) {
      x[2] = region.lo[2] + (iz + 0.5) * spacing;
      for (int iy = 0; iy < n[1]; ++iy) {
        x[1] = region.lo[1] + (iy + 0.5) * spacing;
        for (int ix = 0; ix < n[0]; ++ix) {
          x[0] = region.lo[0] + (ix + 0.5) * spacing;
          Vec xx = x;
          if (b1.locus().contains(t, xx) || b2.locus().contains(t, xx))
            xx[0] += 0.5 * spacing;
          b1.value(t, xx, v1);
          b2.value(t, xx, v2);
          double m2 = 0;
          for (int c = 0; c < d; ++c) {
            const double diff = v1[c] - v2[c];
            m2 += diff * diff;
          }
          acc += m2;
        }
      }
    }
  }
  return std::sqrt(acc * spacing * spacing * spacing * dt);
}

}  // namespace driftlab
