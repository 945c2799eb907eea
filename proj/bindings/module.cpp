// Python bindings for the main laboratory operations: field catalog and
// form-bound estimation, the mollifier builder, the weighted parabolic
// solver, and the Euler-Maruyama simulator with its path functionals.

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "driftlab/fields.hpp"
#include "driftlab/harness.hpp"
#include "driftlab/mollify.hpp"
#include "driftlab/pde.hpp"
#include "driftlab/sde.hpp"

namespace py = pybind11;
using namespace driftlab;

namespace {

Vec to_vec(const std::vector<double>& x) {
  Vec v(static_cast<int>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<int>(i)] = x[i];
  return v;
}

std::vector<double> from_vec(const Vec& v) {
  return std::vector<double>(v.v.begin(), v.v.begin() + v.d);
}

struct PyField {
  FieldPtr ptr;
};

struct PyMollified {
  MollifiedPtr ptr;
  MollifierSchedule sched;
};

SpaceTimeGrid grid_from_kwargs(double L, int n, double T, int steps) {
  return SpaceTimeGrid{L, n, 0.0, T, steps, 1.25};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "numerical laboratory for singular-drift diffusions";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "DriftlabError");

  py::class_<PyField>(m, "Field")
      .def_property_readonly("id", [](const PyField& f) { return f.ptr->id(); })
      .def_property_readonly("dim",
                             [](const PyField& f) { return f.ptr->dim(); })
      .def_property_readonly("delta",
                             [](const PyField& f) {
                               return f.ptr->certificate()
                                          ? f.ptr->certificate()->delta
                                          : -1.0;
                             })
      .def_property_readonly("certificate", [](const PyField& f) {
        std::map<std::string, std::string> rec;
        if (f.ptr->certificate()) rec = f.ptr->certificate()->record();
        return rec;
      });

  m.def(
      "make_field",
      [](const std::string& id, const std::map<std::string, double>& params) {
        return PyField{make_field(id, params)};
      },
      py::arg("id"), py::arg("params") = std::map<std::string, double>{},
      "catalog lookup: zero, hardy, hardy-time, shell-log, lps, weak-ld, "
      "sum:<id>+<id>");

  m.def(
      "eval_drift",
      [](const PyField& f, double t, const std::vector<double>& x) {
        return from_vec(eval_drift(*f.ptr, t, to_vec(x)));
      },
      py::arg("field"), py::arg("t"), py::arg("x"));

  m.def(
      "estimate_form_bound",
      [](const PyField& f, int budget, const std::string& pattern,
         std::uint64_t seed) {
        TestFunctionFamily fam;
        fam.d = f.ptr->dim();
        fam.anchor = Vec::zero(f.ptr->dim());
        fam.seed = seed;
        fam.pattern = pattern == "origin"
                          ? TestFunctionFamily::Pattern::OriginConcentrating
                          : pattern == "shell"
                                ? TestFunctionFamily::Pattern::ShellProbing
                                : TestFunctionFamily::Pattern::Generic;
        return estimate_form_bound(*f.ptr, fam, budget);
      },
      py::arg("field"), py::arg("budget") = 16, py::arg("pattern") = "origin",
      py::arg("seed") = 1);

  py::class_<PyMollified>(m, "MollifiedField")
      .def_property_readonly(
          "schedule",
          [](const PyMollified& f) {
            return f.sched.record();
          })
      .def_property_readonly(
          "sup_bound",
          [](const PyMollified& f) { return f.ptr->sup_bound(); })
      .def("__call__",
           [](const PyMollified& f, double t, const std::vector<double>& x) {
             return from_vec(f.ptr->value(t, to_vec(x)));
           });

  m.def(
      "build_approximation",
      [](const PyField& f, int m, double gamma0, double gamma_pow,
         int divisions, double box_cap) {
        if (!f.ptr->certificate())
          throw InvalidParameter("field carries no certificate");
        MollifyConfig cfg;
        cfg.divisions = divisions;
        cfg.box_cap = box_cap;
        auto [bm, sched] = build_approximation(
            f.ptr, *f.ptr->certificate(), m,
            [gamma0, gamma_pow](int mm) {
              return gamma0 / std::pow(mm, gamma_pow);
            },
            cfg);
        return PyMollified{bm, sched};
      },
      py::arg("field"), py::arg("m"), py::arg("gamma0") = 1.0,
      py::arg("gamma_pow") = 1.0, py::arg("divisions") = 96,
      py::arg("box_cap") = 4.0);

  m.def(
      "l2loc_distance",
      [](const PyField& a, const PyMollified& b, double halfwidth, double T,
         double spacing) {
        Region reg{Vec{-halfwidth, -halfwidth, -halfwidth},
                   Vec{halfwidth, halfwidth, halfwidth}, 0.0, T};
        return l2loc_distance(*a.ptr, *b.ptr, reg, spacing);
      },
      py::arg("raw"), py::arg("mollified"), py::arg("halfwidth") = 2.0,
      py::arg("T") = 1.0, py::arg("spacing") = 0.25);

  m.def(
      "solve_forward",
      [](py::object drift, double sigma0, double L, int n, double T,
         int steps) {
        const DriftField* b = nullptr;
        if (!drift.is_none()) b = drift.cast<const PyMollified&>().ptr.get();
        const SpaceTimeGrid grid = grid_from_kwargs(L, n, T, steps);
        GridSolution sol = solve_forward_cauchy(
            b, gaussian_profile(sigma0, Vec::zero(3)), SourceTerm{}, grid,
            SolveOptions{1, true});
        const int last = sol.levels() - 1;
        py::array_t<double> out({n, n, n});
        auto r = out.mutable_unchecked<3>();
        for (int iz = 0; iz < n; ++iz)
          for (int iy = 0; iy < n; ++iy)
            for (int ix = 0; ix < n; ++ix)
              r(iz, iy, ix) = sol.value(last, ix, iy, iz);
        py::dict info;
        info["t"] = sol.time(last);
        info["boundary_leak"] = sol.boundary_leak();
        info["sup"] = sol.sup_norm(last);
        return py::make_tuple(out, info);
      },
      py::arg("drift") = py::none(), py::arg("sigma0") = 0.8,
      py::arg("L") = 4.0, py::arg("n") = 48, py::arg("T") = 0.25,
      py::arg("steps") = 60,
      "final level of the forward Cauchy solve with Gaussian data");

  m.def(
      "heat_oracle_rel_error",
      [](double L, int n, double T, int steps, double sigma) {
        return heat_oracle_rel_error(grid_from_kwargs(L, n, T, steps), sigma);
      },
      py::arg("L") = 4.0, py::arg("n") = 48, py::arg("T") = 0.25,
      py::arg("steps") = 60, py::arg("sigma") = 0.8);

  m.def(
      "simulate",
      [](py::object drift, const std::vector<double>& x, double ht, double T,
         int n_paths, std::uint64_t seed, int substep) {
        FieldPtr b;
        if (py::isinstance<PyMollified>(drift))
          b = drift.cast<const PyMollified&>().ptr;
        else
          b = drift.cast<const PyField&>().ptr;
        SimConfig cfg;
        cfg.ht = ht;
        cfg.T = T;
        cfg.n_paths = n_paths;
        cfg.seed = seed;
        cfg.substep = substep;
        PathEnsemble ens = simulate_euler(b, to_vec(x), cfg);
        const int K = ens.steps();
        py::array_t<double> out({n_paths, K + 1, ens.dim()});
        auto r = out.mutable_unchecked<3>();
        for (int p = 0; p < n_paths; ++p)
          for (int k = 0; k <= K; ++k)
            for (int a = 0; a < ens.dim(); ++a) r(p, k, a) = ens.coord(p, k, a);
        return out;
      },
      py::arg("drift"), py::arg("x"), py::arg("ht") = 1.0 / 256,
      py::arg("T") = 1.0, py::arg("n_paths") = 1000, py::arg("seed") = 1,
      py::arg("substep") = 4,
      "Euler-Maruyama paths, shape (n_paths, steps+1, d)");

  m.def(
      "duality_gap",
      [](const PyMollified& b, double sigma0, double T, double L, int n,
         int steps, double ht, int n_paths, std::uint64_t seed) {
        SimConfig cfg;
        cfg.ht = ht;
        cfg.T = T;
        cfg.n_paths = n_paths;
        cfg.seed = seed;
        const SpaceTimeGrid grid = grid_from_kwargs(L, n, T, steps);
        const double budget = heat_oracle_rel_error(grid, sigma0);
        const auto rep =
            duality_check(Vec::zero(3), gaussian_profile(sigma0, Vec::zero(3)),
                          T, b.ptr, grid, cfg, budget);
        py::dict d;
        d["mc"] = rep.lhs;
        d["pde"] = rep.rhs;
        d["stderr"] = rep.stderr_est;
        d["budget"] = rep.budget;
        d["pass"] = rep.pass;
        return d;
      },
      py::arg("drift"), py::arg("sigma0") = 0.8, py::arg("T") = 0.25,
      py::arg("L") = 4.0, py::arg("n") = 48, py::arg("steps") = 60,
      py::arg("ht") = 1.0 / 256, py::arg("n_paths") = 2000,
      py::arg("seed") = 1);

  m.def(
      "verify",
      [](const std::string& level, const std::vector<int>& criteria,
         const std::string& out_dir) {
        const auto results = verify_suite(
            level == "full" ? VerifyLevel::Full : VerifyLevel::Quick, out_dir,
            criteria);
        py::list out;
        for (const auto& r : results) {
          py::dict d;
          d["index"] = r.index;
          d["name"] = r.name;
          d["pass"] = r.pass;
          d["detail"] = r.detail;
          out.append(d);
        }
        return out;
      },
      py::arg("level") = "quick", py::arg("criteria") = std::vector<int>{},
      py::arg("out_dir") = "verify-out");

  m.def("strichartz_delta", &strichartz_delta, py::arg("weak_ld_norm"),
        py::arg("d"));
  m.def("sharp_sobolev_constant", &sharp_sobolev_constant, py::arg("d"));
  m.def("unit_ball_volume", &unit_ball_volume, py::arg("d"));
}
