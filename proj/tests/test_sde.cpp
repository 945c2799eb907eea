#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "driftlab/mollify.hpp"
#include "driftlab/rng.hpp"
#include "driftlab/sde.hpp"

using namespace driftlab;

namespace {
SimConfig dev_cfg(int n_paths = 2000, double T = 1.0, double ht = 1.0 / 256) {
  SimConfig cfg;
  cfg.ht = ht;
  cfg.T = T;
  cfg.n_paths = n_paths;
  cfg.seed = 7;
  return cfg;
}
MollifyConfig dev_mollify(int div = 96, double cap = 4.0) {
  MollifyConfig cfg;
  cfg.divisions = div;
  cfg.box_cap = cap;
  return cfg;
}
}  // namespace

TEST_CASE("Brownian baseline statistics") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(4000);
  const PathEnsemble ens = simulate_euler(zero, Vec::zero(3), cfg);

  // E |X_T|^2 = 2 d T, sample mean within 3 stderr
  double m2 = 0, m4 = 0;
  for (int p = 0; p < cfg.n_paths; ++p) {
    const double v = ens.point(p, ens.steps()).norm2();
    m2 += v;
    m4 += v * v;
  }
  m2 /= cfg.n_paths;
  m4 /= cfg.n_paths;
  const double se = std::sqrt((m4 - m2 * m2) / cfg.n_paths);
  CHECK(std::abs(m2 - 6.0) <= 3.0 * se);

  // per-coordinate increments: mean ~ 0, variance ~ 2 ht (4 stderr)
  for (int a = 0; a < 3; ++a) {
    double mean = 0, var = 0;
    long cnt = 0;
    for (int p = 0; p < cfg.n_paths; p += 4)
      for (int k = 0; k < ens.steps(); ++k) {
        mean += ens.coord(p, k + 1, a) - ens.coord(p, k, a);
        ++cnt;
      }
    mean /= cnt;
    for (int p = 0; p < cfg.n_paths; p += 4)
      for (int k = 0; k < ens.steps(); ++k) {
        const double d = ens.coord(p, k + 1, a) - ens.coord(p, k, a) - mean;
        var += d * d;
      }
    var /= cnt;
    const double sd = std::sqrt(2.0 * cfg.ht / cnt);
    CHECK(std::abs(mean) <= 4.0 * sd);
    const double var_se = var * std::sqrt(2.0 / cnt);
    CHECK(std::abs(var - 2.0 * cfg.ht) <= 4.0 * var_se);
  }
}

TEST_CASE("constant drift moves the mean to x - cT") {
  const Vec c{0.5, -0.2, 0};
  auto bc = make_bounded_field(
      3, [c](double, const Vec&, Vec& o) { o = c; }, 0.6, false, "const");
  const SimConfig cfg = dev_cfg(4000, 1.0);
  const PathEnsemble ens = simulate_euler(bc, Vec{1, 0, 0}, cfg);
  for (int a = 0; a < 3; ++a) {
    double mean = 0;
    for (int p = 0; p < cfg.n_paths; ++p) mean += ens.coord(p, ens.steps(), a);
    mean /= cfg.n_paths;
    const double expect = (a == 0 ? 1.0 : 0.0) - c[a] * cfg.T;
    const double se = std::sqrt(2.0 * cfg.T / cfg.n_paths);
    CHECK(std::abs(mean - expect) <= 3.5 * se);
  }
}

TEST_CASE("identical seeds give bit-identical ensembles") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(64, 0.25);
  const PathEnsemble a = simulate_euler(zero, Vec::zero(3), cfg);
  const PathEnsemble b = simulate_euler(zero, Vec::zero(3), cfg);
  CHECK(a.raw() == b.raw());
  SimConfig other = cfg;
  other.seed = 8;
  const PathEnsemble c = simulate_euler(zero, Vec::zero(3), other);
  CHECK(a.raw() != c.raw());
}

TEST_CASE("stored paths satisfy the update rule bit-exactly") {
  const Vec cvec{0.3, 0.1, -0.2};
  auto bc = make_bounded_field(
      3, [cvec](double, const Vec&, Vec& o) { o = cvec; }, 0.4, false, "const");
  SimConfig cfg = dev_cfg(4, 0.25, 1.0 / 64);
  const PathEnsemble ens = simulate_euler(bc, Vec{0.5, 0, 0}, cfg);
  // replay: no locus, so one macro step per k with d draws from the stream
  for (int p = 0; p < cfg.n_paths; ++p) {
    NormalStream stream(cfg.seed, static_cast<std::uint64_t>(p));
    Vec x{0.5, 0, 0};
    const double noise = std::sqrt(2.0 * cfg.ht);
    for (int k = 0; k < ens.steps(); ++k) {
      for (int a = 0; a < 3; ++a) x[a] += -cvec[a] * cfg.ht + noise * stream.next();
      for (int a = 0; a < 3; ++a) CHECK(ens.coord(p, k + 1, a) == x[a]);
    }
  }
}

TEST_CASE("config validation") {
  auto big = make_bounded_field(
      3, [](double, const Vec&, Vec& o) { o[0] = 50.0; }, 50.0, false, "big");
  SimConfig cfg = dev_cfg();
  cfg.substep = 1;
  CHECK_THROWS_AS(simulate_euler(big, Vec::zero(3), cfg), ConfigInvalid);
  cfg.T = 0.3;  // not a multiple of ht? 0.3/ (1/256) = 76.8
  cfg.ht = 1.0 / 256;
  auto zero = make_zero_field(3);
  CHECK_THROWS_AS(simulate_euler(zero, Vec::zero(3), cfg), ConfigInvalid);
  auto hardy = make_hardy_drift(3, 0.04, 1);
  CHECK_THROWS_AS(simulate_euler(hardy, Vec::zero(3), dev_cfg()),
                  ConfigInvalid);
}

TEST_CASE("krylov functional basics and the Brownian oracle") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(2000, 0.5);
  const PathEnsemble ens = simulate_euler(zero, Vec::zero(3), cfg);

  // f = 0 gives LHS = 0
  auto zf = make_zero_field(3);
  TestFunction h(3, 0.25, Vec::zero(3), 1.0, 0.25);
  const auto rep0 = krylov_functional(ens, *zf, h, 4.0);
  CHECK(rep0.lhs == 0.0);
  CHECK(rep0.ratio == 0.0);

  // f = 1: occupation-weighted integral of the bump under Brownian motion,
  // cross-checked against a 10x finer-step simulation.
  auto one = make_bounded_field(
      3, [](double, const Vec&, Vec& o) { o[0] = 1.0; }, 1.0, false, "one");
  const auto rep1 = krylov_functional(ens, *one, h, 4.0);
  SimConfig fine = cfg;
  fine.ht = cfg.ht / 10;
  fine.seed = 77;
  fine.n_paths = 2000;
  const PathEnsemble ens_fine = simulate_euler(zero, Vec::zero(3), fine);
  const auto rep_fine = krylov_functional(ens_fine, *one, h, 4.0);
  CHECK(std::abs(rep1.lhs - rep_fine.lhs) <=
        3.0 * (rep1.stderr_est + rep_fine.stderr_est) + 0.01 * rep_fine.lhs);
  CHECK(rep1.ratio > 0.0);
  CHECK(std::isfinite(rep1.ratio));

  CHECK_THROWS_AS(krylov_functional(ens, *one, h, 2.0), QOutOfRange);
}

TEST_CASE("expected drift integral") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(500, 1.0);
  const PathEnsemble ens = simulate_euler(zero, Vec::zero(3), cfg);
  FormBoundCertificate cert{0.04, GFunction::zero(), Provenance::Hardy};

  const auto rep0 = expected_drift_integral(ens, *zero, cert, Window{0, 0.5});
  CHECK(rep0.lhs == 0.0);
  CHECK(rep0.rhs == doctest::Approx(0.5));  // g = 0: F(h) = h

  // nonzero g: the window integral enters F
  FormBoundCertificate certg{0.04, GFunction::constant(0.3),
                             Provenance::Hardy};
  const auto repg = expected_drift_integral(ens, *zero, certg, Window{0, 0.5});
  CHECK(repg.rhs == doctest::Approx(0.5 + 0.15));
}

TEST_CASE("modulus of continuity") {
  auto zero = make_zero_field(3);

  // frozen paths: zero drift and zero noise
  SimConfig frozen = dev_cfg(50, 0.25);
  frozen.zero_noise = true;
  const PathEnsemble still = simulate_euler(zero, Vec{1, 2, 3}, frozen);
  const auto rep0 = modulus_of_continuity(still, 0.5, 8.0 / 256);
  CHECK(rep0.lhs == 0.0);

  // Brownian scaling: LHS ~ h^{beta/2}; slope of the log-log fit near 1/4
  const SimConfig cfg = dev_cfg(1000, 1.0);
  const PathEnsemble ens = simulate_euler(zero, Vec::zero(3), cfg);
  std::vector<double> lhs, hs;
  for (int lag : {4, 16, 64}) {
    const double h = lag * cfg.ht;
    lhs.push_back(modulus_of_continuity(ens, 0.5, h).lhs);
    hs.push_back(h);
  }
  const double slope = std::log(lhs[2] / lhs[0]) / std::log(hs[2] / hs[0]);
  CHECK(slope == doctest::Approx(0.25).epsilon(0.2));

  CHECK_THROWS_AS(modulus_of_continuity(ens, 1.5, 4 * cfg.ht),
                  InvalidParameter);
  CHECK_THROWS_AS(modulus_of_continuity(ens, 0.5, 1.3 * cfg.ht),
                  InvalidParameter);
}

TEST_CASE("modulus constant is stable across mollifier levels") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  auto sched = build_schedule(hardy, *hardy->certificate(), {8, 16},
                              default_gamma_rule(), dev_mollify());
  std::vector<double> cs;
  for (const auto& [bm, s] : sched) {
    SimConfig cfg = dev_cfg(800, 0.5, 1.0 / 256);
    cfg.substep = 4;
    const PathEnsemble ens = simulate_euler(bm, Vec{0.5, 0, 0}, cfg);
    cs.push_back(modulus_of_continuity(ens, 0.5, 16.0 / 256).ratio);
  }
  CHECK(cs[0] <= 2.0 * cs[1]);
  CHECK(cs[1] <= 2.0 * cs[0]);
}

TEST_CASE("marginal KS distance") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(2000, 0.5);
  const PathEnsemble a = simulate_euler(zero, Vec::zero(3), cfg);
  CHECK(marginal_distance(a, a, 0.5) == 0.0);
  CHECK_THROWS_AS(marginal_distance(a, a, 0.123), TimeUnavailable);

  SimConfig other = cfg;
  other.seed = 99;
  const PathEnsemble b = simulate_euler(zero, Vec::zero(3), other);
  const double noise_floor = marginal_distance(a, b, 0.5);
  CHECK(noise_floor > 0.0);
  CHECK(noise_floor < 0.08);  // two-seed same-law ensembles stay near zero
}

TEST_CASE("occupation near the origin") {
  auto zero = make_zero_field(3);
  SimConfig cfg = dev_cfg(500, 1.0);
  Vec far{10, 0, 0};
  const PathEnsemble ens = simulate_euler(zero, far, cfg);
  CHECK(occupation_near_origin(ens, 0.1, Window{0, 1.0}) <= 1e-3);

  // started at the origin the early occupation is positive
  const PathEnsemble ens0 = simulate_euler(zero, Vec::zero(3), cfg);
  CHECK(occupation_near_origin(ens0, 0.1, Window{0, 1.0}) > 0.0);
  CHECK_THROWS_AS(occupation_near_origin(ens0, -1.0, Window{0, 1.0}),
                  InvalidParameter);
}

TEST_CASE("subcritical occupation decays with the horizon") {
  auto hardy = make_hardy_drift(3, 0.5 / 9.0, 1);
  auto built = build_approximation(
      hardy, *hardy->certificate(), 16,
      [](int m) { return 4.0 / m; }, dev_mollify());
  SimConfig cfg = dev_cfg(800, 0.5, 1.0 / 256);
  cfg.substep = 8;
  const PathEnsemble e1 = simulate_euler(built.first, Vec::zero(3), cfg);
  SimConfig cfg2 = cfg;
  cfg2.T = 2.0;
  const PathEnsemble e2 = simulate_euler(built.first, Vec::zero(3), cfg2);
  const double occ1 = occupation_near_origin(e1, 0.1, Window{0, 0.5});
  const double occ2 = occupation_near_origin(e2, 0.1, Window{0, 2.0});
  CHECK(occ2 < occ1);
  CHECK(occ1 < 0.2);
}

TEST_CASE("duality for the zero drift equals the closed form") {
  auto zero = make_zero_field(3);
  SpaceTimeGrid grid{4.0, 48, 0.0, 0.25, 60, 1.25};
  SimConfig cfg = dev_cfg(4000, 0.25, 1.0 / 256);
  const double budget = 0.01;
  const auto rep = duality_check(Vec{0.5, 0, 0},
                                 gaussian_profile(0.8, Vec::zero(3)), 0.25,
                                 zero, grid, cfg, budget);
  // E f(x + sqrt(2) W_T) for a Gaussian f has a closed form
  const double s2 = 0.64 + 2 * 0.25;
  const double closed =
      std::pow(0.64 / s2, 1.5) * std::exp(-0.25 / (2 * s2));
  CHECK(std::abs(rep.lhs - closed) <= 3.0 * rep.stderr_est);
  CHECK(std::abs(rep.rhs - closed) <= budget);
  CHECK(rep.pass);
}

TEST_CASE("ensemble export block") {
  auto zero = make_zero_field(3);
  const SimConfig cfg = dev_cfg(8, 0.25);
  const PathEnsemble ens = simulate_euler(zero, Vec::zero(3), cfg);
  std::ostringstream os(std::ios::binary);
  ens.export_block(os);
  const std::string blob = os.str();
  CHECK(blob.substr(0, 4) == "DLE1");
  const std::size_t expect = 4 + 8 + 8 + 4 + 8 + 8 +
                             ens.raw().size() * sizeof(double);
  CHECK(blob.size() == expect);
}
