#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driftlab/fields.hpp"
#include "driftlab/rng.hpp"

using namespace driftlab;

namespace {

// 1-D radial midpoint quadrature with geometric refinement toward rho = 0,
// the independent oracle for the radial integrals behind the quotients.
double radial_integral(const std::function<double(double)>& f, double lo,
                       double hi, int levels = 40, int cells = 64) {
  double acc = 0;
  double b = hi;
  for (int l = 0; l < levels && b > lo; ++l) {
    const double a = std::max(lo, 0.5 * b);
    const double h = (b - a) / cells;
    for (int i = 0; i < cells; ++i) acc += f(a + (i + 0.5) * h) * h;
    b = a;
  }
  return acc;
}

double bump(double rho) {
  return rho * rho >= 1 ? 0.0 : std::exp(1.0 - 1.0 / (1.0 - rho * rho));
}
double bump_deriv(double rho) {
  if (rho * rho >= 1) return 0.0;
  const double om = 1.0 - rho * rho;
  return bump(rho) * (-2.0 * rho / (om * om));
}

}  // namespace

TEST_CASE("eval_drift basics") {
  auto zero = make_zero_field(3);
  const Vec x{0.3, -1.0, 2.0};
  const Vec v = eval_drift(*zero, 0.7, x);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 0.0);
  CHECK(v[2] == 0.0);

  auto hardy = make_hardy_drift(3, 0.01, 1);
  const Vec b = eval_drift(*hardy, 0.0, Vec{1, 0, 0});
  CHECK(b[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(b[1] == 0.0);
  CHECK(b[2] == 0.0);

  CHECK_THROWS_AS(eval_drift(*hardy, 0.0, Vec::zero(3)), SingularSample);
  CHECK_THROWS_AS(eval_drift(*hardy, 0.0, Vec{1, 0}), DimensionMismatch);
}

TEST_CASE("hardy field closed forms and parameter checks") {
  auto h3 = make_hardy_drift(3, 0.04, 1);
  CHECK(h3->value(0.0, Vec{2, 0, 0}).norm() == doctest::Approx(0.05));
  CHECK(h3->certificate()->delta == 0.04);
  CHECK(h3->certificate()->g.is_zero());

  auto h5 = make_hardy_drift(5, 0.01, 1);
  Vec x5(5);
  x5[0] = 3.0;
  CHECK(h5->value(0.0, x5).norm() == doctest::Approx(0.05));

  CHECK_THROWS_AS(make_hardy_drift(3, -0.1, 1), InvalidParameter);
  CHECK_THROWS_AS(make_hardy_drift(3, 0.0, 1), InvalidParameter);
  CHECK_THROWS_AS(make_hardy_drift(3, 0.04, 1, TimeModulation::cosine(1.4, 1)),
                  InvalidParameter);
  CHECK_THROWS_AS(make_hardy_drift(2, 0.04, 1), InvalidParameter);
}

TEST_CASE("hardy quotient matches the radial oracle and Hardy bound") {
  const double delta = 0.04;
  for (int d : {3, 4}) {
    auto hardy = make_hardy_drift(d, delta, 1);
    TestFunction phi(d, 0.5, Vec::zero(d), 1.0, 0.5);  // plain bump
    QuadratureSpec spec;
    if (d == 4) spec.base_cells = 12;
    const double q = rayleigh_quotient(*hardy, phi, GFunction::zero(), spec);

    // oracle: delta ((d-2)/2)^2 int psi^2 r^{d-3} / int psi'^2 r^{d-1}
    const double num = radial_integral(
        [&](double r) { return bump(r) * bump(r) * std::pow(r, d - 3); }, 0, 1);
    const double den = radial_integral(
        [&](double r) {
          return bump_deriv(r) * bump_deriv(r) * std::pow(r, d - 1);
        },
        0, 1);
    const double oracle = delta * 0.25 * (d - 2) * (d - 2) * num / den;
    CHECK(q == doctest::Approx(oracle).epsilon(0.02));
    // Hardy's inequality puts every quotient below delta.
    CHECK(q <= delta * 1.05);
    CHECK(num / den <= std::pow(2.0 / (d - 2), 2) * 1.0001);
  }
}

TEST_CASE("hardy quotient is dilation invariant") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  TestFunction a(3, 0.5, Vec::zero(3), 1.0, 0.5, 0.5, 0.01);
  TestFunction b(3, 0.5, Vec::zero(3), 0.25, 0.5, 0.5, 0.01);
  const double qa = rayleigh_quotient(*hardy, a, GFunction::zero());
  const double qb = rayleigh_quotient(*hardy, b, GFunction::zero());
  CHECK(qa == doctest::Approx(qb).epsilon(0.01));
}

TEST_CASE("rayleigh quotient trivial identities") {
  auto zero = make_zero_field(3);
  TestFunction phi(3, 0.5, Vec::zero(3), 1.0, 0.5);
  CHECK(rayleigh_quotient(*zero, phi, GFunction::zero()) == 0.0);

  // |b| = c with g = c^2: numerator cancels exactly.
  const double c = 0.7;
  auto cfield = make_bounded_field(
      3, [c](double, const Vec&, Vec& out) { out[0] = c; }, c, false, "const");
  const double q =
      rayleigh_quotient(*cfield, phi, GFunction::constant(c * c));
  CHECK(q <= 1e-10);
  CHECK(q >= -1e-10);
}

TEST_CASE("estimate_form_bound window for the Hardy field") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  TestFunctionFamily fam;
  fam.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
  fam.anchor = Vec::zero(3);
  const double est = estimate_form_bound(*hardy, fam, 32);
  CHECK(est >= 0.02);
  CHECK(est <= 0.04 * 1.05);

  auto zero = make_zero_field(3);
  CHECK(estimate_form_bound(*zero, fam, 4) == 0.0);

  // bounded smooth field with g = squared sup bound: estimate <= 0
  const double c = 0.4;
  auto cf = make_bounded_field(
      3, [c](double, const Vec&, Vec& out) { out[0] = c; }, c, false, "const");
  auto certified = with_certificate(
      cf, FormBoundCertificate{0.0, GFunction::constant(c * c),
                               Provenance::NumericEstimate});
  CHECK(estimate_form_bound(*certified, fam, 4) <= 1e-10);
}

TEST_CASE("catalog certificates are never beaten by the estimator") {
  TestFunctionFamily origin;
  origin.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
  origin.anchor = Vec::zero(3);
  TestFunctionFamily generic;
  generic.pattern = TestFunctionFamily::Pattern::Generic;
  generic.anchor = Vec::zero(3);
  generic.seed = 17;

  QuadratureSpec cheap;
  cheap.base_cells = 10;
  cheap.max_refine_levels = 10;
  cheap.time_cells = 9;

  for (const char* id : {"hardy", "weak-ld", "lps", "hardy-time"}) {
    auto f = make_field(id);
    REQUIRE(f->certificate().has_value());
    const double delta = f->certificate()->delta;
    for (const auto* fam : {&origin, &generic}) {
      const double est = estimate_form_bound(*f, *fam, 4, cheap);
      CHECK_MESSAGE(est <= delta * 1.05 + 1e-12,
                    "field ", id, " est ", est, " delta ", delta);
    }
  }
}

TEST_CASE("shell-log field closed form and integrability") {
  auto shell = make_shell_log_drift(1.0, 0.5, 2.0);
  // ||x|-1| = 1/e inside the shell: |b|^2 = e / 1^2
  const double r = 1.0 + std::exp(-1.0);
  const Vec x{r, 0, 0};
  CHECK(shell->value(0.0, x).norm2() == doctest::Approx(std::exp(1.0)));
  CHECK(shell->value(0.0, Vec{2.0, 0, 0}).norm2() == 0.0);
  CHECK(shell->value(0.0, Vec{0.3, 0, 0}).norm2() == 0.0);

  // Radial mass with geometric refinement toward the shell: the L^2 sums
  // converge while the L^2.5 sums keep growing.
  auto mass = [&](double p, int levels) {
    double acc = 0;
    double w_hi = 0.5;
    for (int l = 0; l < levels; ++l) {
      const double w_lo = 0.5 * w_hi;
      const int n = 32;
      const double h = (w_hi - w_lo) / n;
      for (int i = 0; i < n; ++i) {
        const double w = w_lo + (i + 0.5) * h;
        const double b2 = 1.0 / (w * std::pow(-std::log(w), 2.0));
        // both shell sides, surface measure ~ 4 pi r^2 with r ~ 1
        acc += 2.0 * std::pow(b2, 0.5 * p) * 4.0 * M_PI * h;
      }
      w_hi = w_lo;
    }
    return acc;
  };
  const double l2_coarse = mass(2.0, 12);
  const double l2_fine = mass(2.0, 100);
  CHECK((l2_fine - l2_coarse) / l2_fine < 0.15);  // convergent tail
  const double l25_coarse = mass(2.5, 12);
  const double l25_fine = mass(2.5, 100);
  CHECK(l25_fine > 5.0 * l25_coarse);  // refinement keeps adding mass
  CHECK_THROWS_AS(make_shell_log_drift(1.0, 1.5, 2.0), InvalidParameter);
  CHECK_THROWS_AS(make_shell_log_drift(1.0, 0.5, 0.9), InvalidParameter);
}

TEST_CASE("strichartz delta and the two volume readings") {
  CHECK(strichartz_delta(0.0, 3) == 0.0);
  // d = 3 factor 2/(d-2) = 2
  const double v3 = unit_ball_volume(3);
  CHECK(strichartz_delta(1.0, 3) ==
        doctest::Approx(std::pow(std::pow(v3, -1.0 / 3) * 2.0, 2)));

  // Independent unit-ball-volume oracle: V_d = (2 pi / d) V_{d-2}.
  double v[8];
  v[0] = 1.0;
  v[1] = 2.0;
  for (int d = 2; d < 8; ++d) v[d] = 2.0 * M_PI / d * v[d - 2];
  for (int d : {3, 4, 5}) CHECK(unit_ball_volume(d) == doctest::Approx(v[d]));

  const auto r = strichartz_delta_readings(1.0, 4);
  CHECK(r.omega_standard == doctest::Approx(v[4]));
  CHECK(r.omega_alt == doctest::Approx(M_PI * M_PI * std::tgamma(3.0)));
  CHECK(r.delta_standard ==
        doctest::Approx(std::pow(std::pow(v[4], -0.25), 2)));
  CHECK(r.delta_standard != r.delta_alt);
}

TEST_CASE("weak-ld certificate equals the closed form") {
  const double coef = 0.1;
  auto f = make_weak_ld_drift(3, coef);
  // ||b||_{d,w} = coef V_d^{1/d}; the volume factors cancel:
  CHECK(f->certificate()->delta ==
        doctest::Approx(std::pow(2.0 * coef / (3 - 2), 2)));
  CHECK(f->certificate()->provenance == Provenance::StrichartzWeakLd);
}

TEST_CASE("sum rule certificates") {
  auto h1 = make_hardy_drift(3, 0.01, 1);
  auto h2 = make_hardy_drift(3, 0.01, 1);
  auto sum = sum_fields(h1, h2);
  CHECK(sum->certificate()->delta == doctest::Approx(0.04).epsilon(1e-14));

  auto zero = make_zero_field(3);
  auto s2 = sum_fields(h1, zero);
  CHECK(s2->certificate()->delta == doctest::Approx(0.01));
  const Vec x{0.5, 0.5, 0};
  CHECK((s2->value(0, x) - h1->value(0, x)).norm() == 0.0);

  TestFunctionFamily fam;
  fam.pattern = TestFunctionFamily::Pattern::OriginConcentrating;
  fam.anchor = Vec::zero(3);
  CHECK(estimate_form_bound(*sum, fam, 8) <= 0.04 * 1.05);

  auto h4 = make_hardy_drift(4, 0.01, 1);
  CHECK_THROWS_AS(sum_fields(h1, h4), DimensionMismatch);
}

TEST_CASE("admissible exponent intervals") {
  const auto [lo, hi] = admissible_q_interval(3, 0.01);
  CHECK(lo == 3.0);
  CHECK(hi == doctest::Approx(10.0));
  CHECK(q_admissible(3, 0.01, 4.0));
  CHECK(!q_admissible(3, 0.01, 11.0));
  CHECK(!q_admissible(3, 0.01, 3.0));
  CHECK(contraction_p_lower(0.04) == doctest::Approx(2.0 / 1.8));
  CHECK_THROWS_AS(contraction_p_lower(4.5), POutOfRange);
}

TEST_CASE("test function gradients match central differences") {
  TestFunction phi(3, 0.4, Vec{0.1, -0.2, 0.05}, 0.8, 0.3, 0.5, 0.05, 1.3,
                   0.9);
  NormalStream rng(5, 0);
  const double fd_h = 1e-6;
  int checked = 0;
  double worst = 0;
  while (checked < 1000) {
    Vec x{0.1 + 1.4 * (rng.next_uniform() - 0.5),
          -0.2 + 1.4 * (rng.next_uniform() - 0.5),
          0.05 + 1.4 * (rng.next_uniform() - 0.5)};
    const double t = 0.4 + 0.5 * (rng.next_uniform() - 0.5);
    if (!phi.in_space_support(x) || !phi.in_time_support(t)) continue;
    if ((x - phi.center()).norm() > 0.97 * phi.radius()) continue;
    Vec g(3);
    phi.gradient(t, x, g);
    const double gn = g.norm();
    if (gn < 1e-8) continue;
    for (int a = 0; a < 3; ++a) {
      Vec xp = x, xm = x;
      xp[a] += fd_h;
      xm[a] -= fd_h;
      const double fd = (phi.value(t, xp) - phi.value(t, xm)) / (2 * fd_h);
      worst = std::max(worst, std::abs(fd - g[a]) / std::max(gn, 1e-12));
    }
    ++checked;
  }
  CHECK(worst <= 1e-6);
  // identically zero outside the support
  Vec out{0.1 + 0.81, -0.2, 0.05};
  CHECK(phi.value(0.4, out) == 0.0);
  Vec g(3);
  phi.gradient(0.4, out, g);
  CHECK(g.norm() == 0.0);
  CHECK(phi.value(0.4 + 0.31, phi.center()) == 0.0);
}

TEST_CASE("morrey seminorm") {
  auto zero = make_zero_field(3);
  CubeSampler sampler;
  sampler.domain_center = Vec::zero(3);
  CHECK(morrey_seminorm(*zero, 1.25, sampler, 4) == 0.0);

  // Scale invariance of the Hardy profile on origin-centered cubes.
  auto hardy = make_hardy_drift(3, 0.04, 1);
  QuadratureSpec spec;
  spec.base_cells = 10;
  auto one_cube = [&](double side) {
    CubeSampler s;
    s.domain_center = Vec::zero(3);
    s.min_side = side;
    s.max_side = side;
    return morrey_seminorm(*hardy, 1.25, s, 1, spec);
  };
  const double v1 = one_cube(1.0);
  const double v2 = one_cube(0.25);
  CHECK(v1 == doctest::Approx(v2).epsilon(0.05));

  // Bounded field: value <= M^2 l(Q)^2 -> vanishes with the cube.
  const double M = 0.3;
  auto bf = make_bounded_field(
      3, [M](double, const Vec&, Vec& o) { o[0] = M; }, M, false, "const");
  CHECK(one_cube(1.0) > 0.0);
  const double small = [&] {
    CubeSampler s;
    s.domain_center = Vec::zero(3);
    s.min_side = 0.05;
    s.max_side = 0.05;
    return morrey_seminorm(*bf, 1.25, s, 1, spec);
  }();
  CHECK(small <= M * M * 0.05 * 0.05 * 1.0001);
}

TEST_CASE("sharp Sobolev constant against the extremal profile") {
  // d = 3 extremal (1 + r^2)^{-1/2}: C_S = ||u||_6^2 / ||grad u||_2^2.
  const double grad2 = 4 * M_PI *
                       radial_integral(
                           [](double r) {
                             const double u = 1.0 + r * r;
                             return r * r * r * r / (u * u * u);
                           },
                           0, 400.0, 60, 256);
  const double u6 = 4 * M_PI *
                    radial_integral(
                        [](double r) {
                          const double u = 1.0 + r * r;
                          return r * r / (u * u * u);
                        },
                        0, 400.0, 60, 256);
  const double cs_oracle = std::pow(u6, 1.0 / 3.0) / grad2;
  CHECK(sharp_sobolev_constant(3) == doctest::Approx(cs_oracle).epsilon(1e-3));
  CHECK(sharp_sobolev_constant(3) == doctest::Approx(0.182553).epsilon(1e-4));
}

TEST_CASE("g profiles keep G nondecreasing with G(0) = 0") {
  std::vector<GFunction> gs;
  gs.push_back(GFunction::zero());
  gs.push_back(GFunction::constant(0.7));
  gs.push_back(GFunction::power(0.5, 0.35, 0.6));
  gs.push_back(GFunction::log_power(0.4, 0.35, 1.0, 4.0));
  gs.push_back(GFunction::weighted_sum(2.0, gs[2], 3.0, gs[3]));
  for (const auto& g : gs) {
    CHECK(g.G(0.0) == 0.0);
    double prev = 0;
    for (int i = 1; i <= 200; ++i) {
      const double t = 4.0 * i / 200;
      const double G = g.G(t);
      CHECK(G >= prev - 1e-12);
      prev = G;
    }
    // window integral never exceeds the total mass
    CHECK(g.max_window_integral(0.5, 4.0) <= g.G(4.0) + 1e-12);
  }
  // power-kind G matches a numeric antiderivative
  const auto g = GFunction::power(0.5, 0.35, 0.6);
  const double numeric = radial_integral(
      [&](double u) { return g.g(0.35 + u); }, 0, 0.65, 50, 128);
  CHECK(g.G(1.0) - g.G(0.35) == doctest::Approx(numeric).epsilon(1e-3));
}

TEST_CASE("catalog lookup covers every id") {
  for (const char* id :
       {"zero", "hardy", "hardy-time", "shell-log", "lps", "weak-ld"}) {
    auto f = make_field(id);
    CHECK(f->dim() == 3);
  }
  auto sum = make_field("sum:hardy+weak-ld");
  CHECK(sum->certificate().has_value());
  CHECK_THROWS_AS(make_field("nope"), ConfigInvalid);
  CHECK_THROWS_AS(make_field("sum:hardy"), ConfigInvalid);
}

TEST_CASE("certificate serialization record") {
  auto lps = make_field("lps");
  const auto rec = lps->certificate()->record();
  CHECK(rec.at("provenance") == "young-lps");
  CHECK(rec.at("g_kind") == "power");
  CHECK(rec.count("delta") == 1);
  CHECK(rec.count("g_params") == 1);
}
