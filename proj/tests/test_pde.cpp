#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "driftlab/pde.hpp"

using namespace driftlab;

namespace {
SpaceTimeGrid dev_grid(int n = 48, int steps = 60, double T = 0.25,
                       double L = 4.0) {
  return SpaceTimeGrid{L, n, 0.0, T, steps, 1.25};
}
MollifyConfig dev_mollify(int div = 96, double cap = 4.0) {
  MollifyConfig cfg;
  cfg.divisions = div;
  cfg.box_cap = cap;
  return cfg;
}
}  // namespace

TEST_CASE("grid and weight validation") {
  SpaceTimeGrid bad = dev_grid(48, 10, 0.25);  // h_t far beyond the bound
  CHECK_THROWS_AS(bad.validate(), StabilityViolation);
  dev_grid().validate();

  const Weight w(2.5, 3.0);
  dev_grid().validate_weight(w);
  CHECK_THROWS_AS(dev_grid().validate_weight(Weight(0.001, 3.0)),
                  InvalidParameter);
  CHECK_THROWS_AS(Weight(2.5, 1.0), InvalidParameter);

  // |grad rho| <= theta sqrt(kappa) rho at lattice points (exact forms)
  const SpaceTimeGrid g = dev_grid();
  double worst = 0;
  for (int iz = 0; iz < g.n; iz += 5)
    for (int iy = 0; iy < g.n; iy += 5)
      for (int ix = 0; ix < g.n; ix += 5) {
        Vec x{g.node(ix), g.node(iy), g.node(iz)};
        Vec gr(3);
        w.grad(x, gr);
        worst = std::max(worst, gr.norm() / w.rho(x));
      }
  CHECK(worst <= w.grad_bound_factor() * (1 + 1e-12));
  CHECK(w.tail_fraction(4.0) <= 0.01);
}

TEST_CASE("zero data stays zero") {
  auto sol = solve_forward_cauchy(nullptr, [](const Vec&) { return 0.0; },
                                  SourceTerm{}, dev_grid(32, 40), {});
  for (int k = 0; k < sol.levels(); ++k) CHECK(sol.sup_norm(k) == 0.0);
}

TEST_CASE("heat kernel oracle within two percent") {
  CHECK(heat_oracle_rel_error(dev_grid(), 0.8) <= 0.02);
}

TEST_CASE("constant drift translates the Gaussian") {
  const SpaceTimeGrid g = dev_grid();
  const Vec c{0.5, 0, 0};
  auto bc = make_bounded_field(
      3, [c](double, const Vec&, Vec& o) { o = c; }, 0.5, false, "const");
  auto sol = solve_forward_cauchy(bc.get(), gaussian_profile(0.8, Vec::zero(3)),
                                  SourceTerm{}, g, SolveOptions{1, true});
  const int last = sol.levels() - 1;
  const double tt = sol.time(last);
  const double s2 = 0.64 + 2 * tt;
  const double amp = std::pow(0.64 / s2, 1.5);
  double err = 0, peak = 0;
  for (int iz = 0; iz < g.n; ++iz)
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        // the profile of (d/dt - Lap + c.grad) v = 0 moves with velocity +c
        Vec x{g.node(ix) - c[0] * tt, g.node(iy), g.node(iz)};
        const double exact = amp * std::exp(-x.norm2() / (2 * s2));
        err = std::max(err,
                       std::abs(sol.value(last, ix, iy, iz) - exact));
        peak = std::max(peak, exact);
      }
  CHECK(err / peak <= 0.02);
}

TEST_CASE("solver rejects raw singular drifts and bad CFL") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  CHECK_THROWS_AS(
      solve_forward_cauchy(hardy.get(), gaussian_profile(0.8, Vec::zero(3)),
                           SourceTerm{}, dev_grid(), {}),
      RejectedSingularField);

  // drift large enough to break the advection CFL number
  auto big = make_bounded_field(
      3, [](double, const Vec&, Vec& o) { o[0] = 80.0; }, 80.0, false, "big");
  CHECK_THROWS_AS(
      solve_forward_cauchy(big.get(), gaussian_profile(0.8, Vec::zero(3)),
                           SourceTerm{}, dev_grid(), {}),
      StabilityViolation);
}

TEST_CASE("max principle for homogeneous runs") {
  const auto sol = solve_forward_cauchy(
      nullptr, gaussian_profile(0.6, Vec{0.5, 0, 0}), SourceTerm{},
      dev_grid(40, 50), {});
  const auto& sup = sol.sup_history();
  for (std::size_t k = 1; k < sup.size(); ++k)
    CHECK(sup[k] <= sup[k - 1] + 1e-10);
  CHECK(sol.boundary_leak() <= 1e-3);
}

TEST_CASE("backward solve matches backward heat flow") {
  const SpaceTimeGrid g = dev_grid();
  const double r = g.T;
  auto w = solve_backward_terminal(nullptr, gaussian_profile(0.8, Vec::zero(3)),
                                   SourceTerm{}, g, r, SolveOptions{1, true});
  const int last = w.levels() - 1;  // holds w at t = 0
  const double s2 = 0.64 + 2 * r;
  const double amp = std::pow(0.64 / s2, 1.5);
  double err = 0, peak = 0;
  for (int iz = 0; iz < g.n; ++iz)
    for (int iy = 0; iy < g.n; ++iy)
      for (int ix = 0; ix < g.n; ++ix) {
        Vec x{g.node(ix), g.node(iy), g.node(iz)};
        const double exact = amp * std::exp(-x.norm2() / (2 * s2));
        err = std::max(err, std::abs(w.value(last, ix, iy, iz) - exact));
        peak = std::max(peak, exact);
      }
  CHECK(err / peak <= 0.02);
}

TEST_CASE("backward source bound is grid stable") {
  // w solves the terminal problem with source |b_k|; sup_x w(s, .) <= C F(r-s)
  // with g = 0, so C = sup w / (r - s) should be stable under refinement.
  auto hardy = make_hardy_drift(3, 0.04, 1);
  auto built = build_approximation(hardy, *hardy->certificate(), 8,
                                   default_gamma_rule(), dev_mollify());
  SourceTerm src;
  src.f_mag = built.first.get();
  auto run = [&](int n, int steps) {
    SpaceTimeGrid g = dev_grid(n, steps, 0.25);
    auto w = solve_backward_terminal(built.first.get(),
                                     [](const Vec&) { return 0.0; }, src, g,
                                     0.25, SolveOptions{1, true});
    return w.sup_norm(w.levels() - 1) / 0.25;
  };
  const double c_coarse = run(32, 40);
  const double c_fine = run(64, 120);
  CHECK(std::abs(c_fine - c_coarse) / c_fine <= 0.2);
}

TEST_CASE("energy report basics") {
  // v = 0 with f = 0: all LHS terms vanish
  const SpaceTimeGrid g = dev_grid(24, 40, 0.1);
  auto sol = solve_forward_cauchy(nullptr, [](const Vec&) { return 0.0; },
                                  SourceTerm{}, g, {});
  const Weight w(2.5, 3.0);
  const auto rep = energy_report(sol, 4.0, w, SourceTerm{},
                                 [](const Vec&) { return 0.0; });
  CHECK(rep.lhs_total == 0.0);

  // q = 11 is outside ]3, 10[ for delta = 0.01
  auto hardy01 = make_hardy_drift(3, 0.01, 1);
  auto built = build_approximation(hardy01, *hardy01->certificate(), 4,
                                   default_gamma_rule(), dev_mollify(64, 3.0));
  auto sol2 = solve_forward_cauchy(built.first.get(),
                                   gaussian_profile(0.8, Vec::zero(3)),
                                   SourceTerm{}, dev_grid(32, 40), {});
  CHECK_THROWS_AS(
      energy_report(sol2, 11.0, w, SourceTerm{},
                    gaussian_profile(0.8, Vec::zero(3))),
      QOutOfRange);
  const auto rep2 = energy_report(sol2, 4.0, w, SourceTerm{},
                                  gaussian_profile(0.8, Vec::zero(3)));
  CHECK(rep2.ratio > 0.0);
  CHECK(std::isfinite(rep2.ratio));
}

TEST_CASE("feller gaps vanish for degenerate schedules") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  auto built = build_approximation(hardy, *hardy->certificate(), 4,
                                   default_gamma_rule(), dev_mollify(64, 3.0));
  std::vector<std::pair<MollifiedPtr, MollifierSchedule>> constant_sched = {
      built, built, built};
  const auto rep = feller_convergence(
      constant_sched, gaussian_profile(0.8, Vec::zero(3)), dev_grid(32, 40));
  for (double gap : rep.gaps) CHECK(gap == 0.0);
  CHECK(rep.max_principle_ok);

  auto zero = make_zero_field(3);
  auto zb = build_approximation(zero, *zero->certificate(), 2,
                                default_gamma_rule(), dev_mollify(32, 2.0));
  std::vector<std::pair<MollifiedPtr, MollifierSchedule>> zero_sched = {
      zb, zb, zb};
  const auto repz = feller_convergence(
      zero_sched, gaussian_profile(0.8, Vec::zero(3)), dev_grid(32, 40));
  for (double gap : repz.gaps) CHECK(gap == 0.0);

  CHECK_THROWS_AS(
      feller_convergence({built, built}, gaussian_profile(0.8, Vec::zero(3)),
                         dev_grid(32, 40)),
      InvalidParameter);
}

TEST_CASE("feller gaps decrease along a real schedule (dev scale)") {
  auto hardy = make_hardy_drift(3, 0.04, 1);
  auto sched = build_schedule(hardy, *hardy->certificate(), {4, 8, 16},
                              default_gamma_rule(), dev_mollify());
  const auto rep = feller_convergence(
      sched, gaussian_profile(0.8, Vec::zero(3)), dev_grid());
  REQUIRE(rep.gaps.size() == 2);
  CHECK(rep.gaps[1] < rep.gaps[0]);
  CHECK(rep.max_principle_ok);
}

TEST_CASE("Lp quasi-contraction") {
  const SpaceTimeGrid g = dev_grid(40, 50);
  auto sol = solve_forward_cauchy(nullptr, gaussian_profile(0.8, Vec::zero(3)),
                                  SourceTerm{}, g, {});
  FormBoundCertificate trivial{0.0, GFunction::zero(), Provenance::Hardy};
  const auto rep = lp_contraction_check(sol, 4.0, trivial);
  CHECK(rep.pass);
  CHECK(rep.lhs <= rep.rhs * 1.0001);

  auto zsol = solve_forward_cauchy(nullptr, [](const Vec&) { return 0.0; },
                                   SourceTerm{}, dev_grid(24, 40, 0.1), {});
  const auto zrep = lp_contraction_check(zsol, 4.0, trivial);
  CHECK(zrep.lhs == 0.0);
  CHECK(zrep.pass);

  FormBoundCertificate c04{0.04, GFunction::zero(), Provenance::Hardy};
  CHECK_THROWS_AS(lp_contraction_check(sol, 1.05, c04), POutOfRange);
}

TEST_CASE("smoothing exponent fits") {
  const SpaceTimeGrid g = dev_grid(48, 60, 0.25);
  SpatialFn f0 = homogeneous_profile(3, 2.0, 2.5, 3.5);
  auto sol = solve_forward_cauchy(nullptr, f0, SourceTerm{}, g, {});
  const auto fit = smoothing_exponent_fit(sol, 2.0, 4.0, 0.06, 0.24);
  const double target = -0.375;
  CHECK(std::abs(fit.slope - target) <= 0.15 * std::abs(target));

  // p = q: the exponent vanishes; a wide Gaussian keeps the norm flat
  auto wide = solve_forward_cauchy(nullptr, gaussian_profile(2.0, Vec::zero(3)),
                                   SourceTerm{}, g, {});
  const auto fit_pp = smoothing_exponent_fit(wide, 2.0, 2.0, 0.06, 0.24);
  CHECK(std::abs(fit_pp.slope) <= 0.1);

  CHECK_THROWS_AS(smoothing_exponent_fit(sol, 2.0, 4.0, 0.2, 0.201),
                  InsufficientSamples);
  CHECK_THROWS_AS(smoothing_exponent_fit(sol, 4.0, 2.0, 0.06, 0.24),
                  InvalidParameter);
}

TEST_CASE("Richardson sanity under grid refinement") {
  auto norm_at = [](int n, int steps) {
    auto sol = solve_forward_cauchy(nullptr,
                                    gaussian_profile(0.8, Vec::zero(3)),
                                    SourceTerm{}, dev_grid(n, steps), {1, true});
    return sol.lp_norm(sol.levels() - 1, 2);
  };
  const double n16 = norm_at(16, 8);
  const double n32 = norm_at(32, 30);
  const double n64 = norm_at(64, 120);
  CHECK(std::abs(n64 - n32) <= 5.0 * std::abs(n32 - n16));
}

TEST_CASE("solution export block") {
  const SpaceTimeGrid g = dev_grid(16, 8, 0.02);
  auto sol = solve_forward_cauchy(nullptr, gaussian_profile(0.8, Vec::zero(3)),
                                  SourceTerm{}, g, {});
  std::ostringstream os(std::ios::binary);
  sol.export_block(os);
  std::istringstream is(os.str());
  auto [hdr, payload] = read_block(is);
  CHECK(hdr.rank == 4);
  CHECK(hdr.dims[0] == static_cast<std::uint64_t>(sol.levels()));
  CHECK(payload.size() == sol.nodes() * sol.levels());
}
