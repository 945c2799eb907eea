"""Smoke tests for the python bindings: catalog, solver, simulator."""

import math

import numpy as np
import pytest

import driftlab as dl


def test_catalog_and_eval():
    hardy = dl.make_field("hardy", {"delta": 0.01})
    assert hardy.dim == 3
    assert hardy.delta == pytest.approx(0.01)
    b = dl.eval_drift(hardy, 0.0, [1.0, 0.0, 0.0])
    assert b == pytest.approx([0.05, 0.0, 0.0])
    with pytest.raises(dl.DriftlabError):
        dl.eval_drift(hardy, 0.0, [0.0, 0.0, 0.0])


def test_form_bound_estimate_stays_under_certificate():
    hardy = dl.make_field("hardy", {"delta": 0.04})
    est = dl.estimate_form_bound(hardy, budget=8, pattern="origin")
    assert 0.0 < est <= 0.04 * 1.05


def test_mollifier_schedule():
    hardy = dl.make_field("hardy", {"delta": 0.04})
    bm = dl.build_approximation(hardy, m=4, divisions=48, box_cap=2.0)
    sched = bm.schedule
    assert float(sched["c_m"]) <= 1.0
    assert float(sched["eps_m"]) > 0.0
    val = bm(0.5, [0.5, 0.0, 0.0])
    raw = dl.eval_drift(hardy, 0.5, [0.5, 0.0, 0.0])
    assert 0.0 < val[0] < raw[0]


def test_heat_oracle():
    assert dl.heat_oracle_rel_error(n=32, steps=40) <= 0.02


def test_solver_final_level_mass():
    u, info = dl.solve_forward(n=32, steps=40, sigma0=0.8)
    assert u.shape == (32, 32, 32)
    assert info["boundary_leak"] <= 1e-3
    # peak of the evolved Gaussian
    s2 = 0.64 + 2 * info["t"]
    assert u.max() == pytest.approx((0.64 / s2) ** 1.5, rel=0.03)


def test_simulation_determinism_and_scaling():
    zero = dl.make_field("zero")
    a = dl.simulate(zero, [0.0, 0.0, 0.0], ht=1 / 128, T=0.5, n_paths=400, seed=3)
    b = dl.simulate(zero, [0.0, 0.0, 0.0], ht=1 / 128, T=0.5, n_paths=400, seed=3)
    assert np.array_equal(a, b)
    msd = (a[:, -1, :] ** 2).sum(axis=1).mean()
    assert msd == pytest.approx(6 * 0.5, rel=0.25)


def test_duality_quick():
    hardy = dl.make_field("hardy", {"delta": 0.04})
    bm = dl.build_approximation(hardy, m=4, divisions=48, box_cap=2.0)
    rep = dl.duality_gap(bm, T=0.25, n=32, steps=40, n_paths=1000)
    assert rep["pass"]


def test_constants():
    assert dl.unit_ball_volume(3) == pytest.approx(4.0 / 3.0 * math.pi)
    assert dl.sharp_sobolev_constant(3) == pytest.approx(0.182553, rel=1e-4)
    assert dl.strichartz_delta(0.0, 3) == 0.0
