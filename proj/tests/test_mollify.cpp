#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "driftlab/mollify.hpp"

using namespace driftlab;

namespace {
MollifyConfig dev_cfg(int divisions = 64, double cap = 3.0) {
  MollifyConfig cfg;
  cfg.divisions = divisions;
  cfg.box_cap = cap;
  return cfg;
}
}  // namespace

TEST_CASE("truncate zeroes the right regions") {
  auto zero = make_zero_field(3);
  auto tz = truncate(zero, 4);
  CHECK(tz->value(0.5, Vec{1, 1, 1}).norm() == 0.0);

  // |b| = 0.1/|x| <= m iff |x| >= 0.1/m; also |x| <= m and t in [0, m].
  auto hardy = make_hardy_drift(3, 0.04, 1);
  const int m = 4;
  auto tb = truncate(hardy, m);
  CHECK(tb->bounded_smooth());
  CHECK(tb->sup_bound() == m);
  const double r0 = 0.1 / m;
  CHECK(tb->value(0.5, Vec{0.9 * r0, 0, 0}).norm() == 0.0);
  CHECK(tb->value(0.5, Vec{1.1 * r0, 0, 0}).norm() ==
        doctest::Approx(0.1 / (1.1 * r0)));
  CHECK(tb->value(0.5, Vec{4.5, 0, 0}).norm() == 0.0);
  CHECK(tb->value(-0.1, Vec{1, 0, 0}).norm() == 0.0);  // extension by 0
  CHECK(tb->value(4.7, Vec{1, 0, 0}).norm() == 0.0);
  // the exact singular point is inside the zeroed ball, no throw
  CHECK(tb->value(0.5, Vec::zero(3)).norm() == 0.0);
  CHECK_THROWS_AS(truncate(hardy, 0), InvalidParameter);

  // truncation cannot raise the form bound
  TestFunctionFamily fam;
  fam.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
  fam.anchor = Vec::zero(3);
  QuadratureSpec cheap;
  cheap.base_cells = 12;
  const double est_raw = estimate_form_bound(*hardy, fam, 6, cheap);
  const double est_tr = estimate_form_bound(*tb, fam, 6, cheap);
  CHECK(est_tr <= est_raw + 0.002);
}

TEST_CASE("heat_smooth contracts constants and rejects unbounded input") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  CHECK_THROWS_AS(heat_smooth(hardy, 0.01), UnboundedInput);

  auto zero = make_zero_field(3);
  auto sz = heat_smooth(truncate(zero, 2), 0.01, dev_cfg());
  CHECK(sz->value(0.5, Vec{0.3, 0, 0}).norm() == 0.0);

  // constant field: the kernel preserves the value away from the support edge
  const double c = 0.8;
  auto cf = make_bounded_field(
      3, [c](double, const Vec&, Vec& o) { o[0] = c; }, c, false, "const");
  auto sm = heat_smooth(truncate(cf, 2), 0.005, dev_cfg());
  const Vec probe{0.1, 0.0, -0.1};
  const double got = sm->value(1.0, probe)[0];
  CHECK(got == doctest::Approx(c).epsilon(1e-3));
  // bounded by the input sup everywhere
  CHECK(sm->lattice_sup() <= 2.0 + 1e-12);
}

TEST_CASE("heat_smooth approaches the identity as eps shrinks") {
  // Lipschitz bounded field with compact support after truncation.
  auto lip = make_bounded_field(
      3,
      [](double, const Vec& x, Vec& o) {
        o[0] = std::sin(x[0]) * std::exp(-0.2 * x.norm2());
        o[1] = 0.3 * std::cos(x[1] + 0.5);
      },
      1.4, false, "lipschitz");
  auto trunc = truncate(lip, 2);
  Region reg{Vec{-1.5, -1.5, -1.5}, Vec{1.5, 1.5, 1.5}, 0.2, 1.2};
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.1, 0.01, 0.001}) {
    auto sm = heat_smooth(trunc, eps, dev_cfg());
    const double dist = l2loc_distance(*trunc, *sm, reg, 0.25, 9);
    CHECK(dist < prev);
    prev = dist;
  }
}

TEST_CASE("build_approximation preserves the certificate and level bounds") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  const auto cert = *hardy->certificate();
  TestFunctionFamily fam;
  fam.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
  fam.anchor = Vec::zero(3);
  QuadratureSpec cheap;
  cheap.base_cells = 12;

  auto sched = build_schedule(hardy, cert, {4, 8}, default_gamma_rule(),
                              dev_cfg(80, 3.0));
  double prev_eps = std::numeric_limits<double>::infinity();
  for (const auto& [bm, s] : sched) {
    // certificate is exactly the input pair
    CHECK(bm->certificate()->delta == cert.delta);
    CHECK(bm->certificate()->g.is_zero());
    // boundedness: sup lattice |b_m| <= m
    CHECK(bm->lattice_sup() <= s.m + 1e-9);
    CHECK(bm->sup_bound() <= s.m);
    // schedule consistency: c_m recomputed bit-for-bit
    const double sg = std::sqrt(s.C_S * s.gamma_m * s.gamma_m);
    const double delta_m =
        (std::sqrt(cert.delta) + sg) * (std::sqrt(cert.delta) + sg);
    CHECK(s.delta_m == delta_m);
    CHECK(s.c_m == cert.delta / delta_m);
    CHECK(s.c_m > 0.0);
    CHECK(s.c_m <= 1.0);
    // eps strictly decreasing along the schedule
    CHECK(s.eps_m < prev_eps);
    prev_eps = s.eps_m;
    // delta-preservation at this level
    const double est = estimate_form_bound(*bm, fam, 6, cheap);
    CHECK(est <= 0.04 * 1.05);
  }
}

TEST_CASE("zero field mollifies to zero") {
  auto zero = make_zero_field(3);
  auto [bm, sched] = build_approximation(zero, *zero->certificate(), 4,
                                         default_gamma_rule(), dev_cfg());
  CHECK(bm->value(0.5, Vec{0.5, 0.5, 0}).norm() == 0.0);
  CHECK(sched.c_m == 0.0);  // delta = 0 limit of the scaling formula
}

TEST_CASE("bounded smooth field with shrinking gamma converges to itself") {
  auto cf = make_bounded_field(
      3,
      [](double, const Vec& x, Vec& o) {
        o[0] = 0.5 * std::exp(-x.norm2());
      },
      0.5, false, "smooth");
  FormBoundCertificate cert{0.09, GFunction::zero(),
                            Provenance::NumericEstimate};
  auto certified = with_certificate(cf, cert);
  Region reg{Vec{-1, -1, -1}, Vec{1, 1, 1}, 0.1, 0.9};
  double prev_dist = std::numeric_limits<double>::infinity();
  double prev_c = 0;
  for (double g0 : {1.0, 0.25, 0.05}) {
    auto [bm, sched] = build_approximation(
        certified, cert, 2, [g0](int) { return g0; }, dev_cfg());
    const double dist = l2loc_distance(*truncate(certified, 2), *bm, reg, 0.2, 9);
    CHECK(dist <= prev_dist + 1e-12);
    CHECK(sched.c_m > prev_c);  // c_m increases toward 1 as gamma drops
    prev_dist = dist;
    prev_c = sched.c_m;
  }
  // gamma = 0.05 with delta = 0.09 gives c = (0.3/(0.3 + sqrt(C_S) 0.05))^2
  CHECK(prev_c > 0.85);
}

TEST_CASE("l2loc distance basics and monotone convergence") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  Region reg{Vec{-2, -2, -2}, Vec{2, 2, 2}, 0.0, 1.0};
  CHECK(l2loc_distance(*hardy, *hardy, reg, 0.25, 5) == 0.0);

  // zero vs constant-c field over the unit box x unit interval: c sqrt(vol)
  const double c = 0.3;
  auto cf = make_bounded_field(
      3, [c](double, const Vec&, Vec& o) { o[0] = c; }, c, false, "const");
  auto zero = make_zero_field(3);
  Region unit{Vec{0, 0, 0}, Vec{1, 1, 1}, 0.0, 1.0};
  CHECK(l2loc_distance(*zero, *cf, unit, 0.125, 8) ==
        doctest::Approx(c).epsilon(1e-9));

  auto sched = build_schedule(hardy, *hardy->certificate(), {4, 8, 16},
                              default_gamma_rule(), dev_cfg(96, 4.0));
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& [bm, s] : sched) {
    const double dist = l2loc_distance(*hardy, *bm, reg, 0.25, 9);
    CHECK(dist < prev);
    prev = dist;
  }
}

TEST_CASE("schedule failure on an unreachable gamma") {
  auto hardy = make_hardy_drift(3, 36.0, 1);
  CHECK_THROWS_AS(build_approximation(hardy, *hardy->certificate(), 32,
                                      [](int) { return 1e-9; }, dev_cfg()),
                  ScheduleFailure);
}

TEST_CASE("time-dependent sources take the 4-D lattice path") {
  auto ht = make_hardy_time_drift(3, 0.04, 1, 2 * M_PI, 0.0, 0.35, 1.0);
  MollifyConfig cfg = dev_cfg(32, 1.5);
  cfg.time_divisions = 16;
  cfg.eval_horizon = 1.0;
  auto [bm, sched] = build_approximation(ht, *ht->certificate(), 2,
                                         [](int) { return 0.5; }, cfg);
  CHECK(!bm->has_static_core());
  CHECK(bm->sup_bound() <= 2.0);
  // kappa(t) = cos(2 pi t): at t = 0.5 the hardy part flips sign
  const Vec x{0.8, 0, 0};
  const double v0 = bm->value(0.05, x)[0];
  const double v5 = bm->value(0.5, x)[0];
  CHECK(v0 > 0.0);
  CHECK(v5 < 0.0);
  // certificate carried through unchanged
  CHECK(bm->certificate()->delta == ht->certificate()->delta);
}

TEST_CASE("lattice blocks round-trip bit-exactly") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  auto [bm, sched] = build_approximation(hardy, *hardy->certificate(), 4,
                                         default_gamma_rule(), dev_cfg(48, 2.0));
  std::ostringstream os(std::ios::binary);
  bm->export_block(os);
  std::istringstream is(os.str());
  const SpatialLattice lat = read_spatial_lattice(is);
  CHECK(lat.ncomp() == 3);
  CHECK(lat.data() == bm->spatial_lattice().data());
  CHECK(lat.axis(0).h == bm->spatial_lattice().axis(0).h);
}
