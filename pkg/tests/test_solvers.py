import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lincvx.kernels import KernelAssembly
from lincvx.norms import CurrentField, FormField
from lincvx.poly import Poly
from lincvx.quadrature import QuadratureSpec, reinhardt_grid
from lincvx.solvers import (
    SolveReport, blaschke_check, coordinate_current, current_integrals, d_residual,
    dbar_family, dbar_residual, dbar_solve, divisor_current, divisor_integral,
    homotopy_alpha, koppelman_check, l1_boundary_estimate, load_defaults,
    poincare_d_solve, psh_current, random_psh_current, theory_constants,
)

Z0 = (0, 0)


@pytest.fixture(scope="module")
def asm(ball):
    return KernelAssembly(ball, K0=3.0)


def const_form(c1, c2):
    return FormField(2, 1, {(0,): Poly(2, {(Z0, Z0): c1}), (1,): Poly(2, {(Z0, Z0): c2})})


# ---------------------------------------------------------------- quadrature

def test_ball_volume_and_area(ball):
    q = QuadratureSpec(ball, 0)
    assert q.volume().weights.sum() == pytest.approx(np.pi ** 2 / 2, rel=1e-3)
    assert q.boundary().weights.sum() == pytest.approx(2 * np.pi ** 2, rel=1e-3)
    assert reinhardt_grid(ball, 0).weights.sum() == pytest.approx(np.pi ** 2 / 2, rel=1e-3)


def test_reinhardt_grid_rejects_non_reinhardt(tube):
    with pytest.raises(ValueError):
        reinhardt_grid(tube, 0)


# ---------------------------------------------------------------- reports

def test_report_write_roundtrip(tmp_path):
    rep = SolveReport("demo", "koppelman", "BALL2", passed=True, constants={"c": np.float64(1.5), "z": 1 + 2j},
                      series=[{"a": 1, "b": np.float64(2.0)}, {"a": 3, "c": "x"}])
    jp, cp = rep.write(tmp_path)
    d = json.loads(jp.read_text())
    assert d["passed"] is True and d["constants"]["c"] == 1.5
    assert "series" not in d
    lines = cp.read_text().splitlines()
    assert lines[0] == "a,b,c" and len(lines) == 3
    assert not list(tmp_path.glob("*.tmp"))


def test_defaults_thresholds():
    th = load_defaults()["thresholds"]
    assert th["koppelman_rel"] == 0.05 and th["stability_rel"] == 0.2


def test_theory_constants():
    Cn, Cnp = theory_constants(2)
    assert Cn == pytest.approx(1 / (2j * np.pi) ** 2)
    assert Cnp == pytest.approx(Cn / 2)


# ---------------------------------------------------------------- dbar

def test_family_is_closed(rng):
    Z = rng.normal(size=(20, 2)) * 0.4 + 0j
    for _, f in dbar_family(2):
        assert dbar_residual(f, Z) < 1e-12


def test_dbar_solve_rejects(asm, ball):
    q = QuadratureSpec(ball, 0)
    nonclosed = FormField(2, 1, {(0,): Poly(2, {(Z0, (0, 1)): 1.0})})  # zbar2 dzbar1
    with pytest.raises(ValueError):
        dbar_solve(asm, nonclosed, q)
    with pytest.raises(ValueError):
        dbar_solve(asm, FormField(2, 0, {(): Poly(2, {(Z0, Z0): 1.0})}), q)


def test_dbar_solve_zero_form(asm, ball):
    u, g = dbar_solve(asm, const_form(0.0, 0.0), QuadratureSpec(ball, 0))
    assert np.all(u([[0.2, 0.1]]) == 0) and np.all(g([[0.2, 0.1]]) == 0)


def test_dbar_solve_rejects_boundary_probe(asm, ball):
    u, _ = dbar_solve(asm, dbar_family(2)[1][1], QuadratureSpec(ball, 0))
    with pytest.raises(ValueError):
        u([[0.9999, 0.0]])


def test_koppelman_single_point(asm, ball):
    rep = koppelman_check(asm, dbar_family(2)[1][1], [[0.2, 0.1j]], QuadratureSpec(ball, 0))
    assert rep.residuals["max_relative"] < 0.05


def test_l1_rejects_empty_family(asm, ball):
    with pytest.raises(ValueError):
        l1_boundary_estimate(asm, [], [QuadratureSpec(ball, 0)])


# ---------------------------------------------------------------- Poincare

def test_poincare_coordinate_current():
    w = poincare_d_solve(coordinate_current(2, 0))
    Z = np.array([[0.3 + 0.1j, -0.2j], [0.1, 0.4 + 0.2j]])
    a, b = w(Z)
    # w = (i/2)(z1 dzbar1 - zbar1 dz1)
    assert np.allclose(b[:, 0], 0.5j * Z[:, 0]) and np.allclose(a[:, 0], -0.5j * np.conj(Z[:, 0]))
    assert np.allclose(a[:, 1], 0) and np.allclose(b[:, 1], 0)


def test_poincare_zero():
    zero = CurrentField(2, lambda Z: np.zeros((len(Z), 2, 2), complex))
    a, b = poincare_d_solve(zero)(np.array([[0.1, 0.2j]]))
    assert np.all(a == 0) and np.all(b == 0)


def test_poincare_rejects_non_closed():
    bad = CurrentField(2, lambda Z: np.einsum("n,ij->nij", np.abs(Z[:, 0]) ** 2 + 1, np.diag([0, 1.0])) + 0j)
    with pytest.raises(ValueError):
        poincare_d_solve(bad)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.floats(-3, 3), st.floats(-3, 3))
def test_poincare_linear_and_exact(seed, a, b):
    T1, T2 = random_psh_current(2, seed=seed), psh_current(2)
    T = CurrentField(2, lambda Z: a * T1(Z) + b * T2(Z))
    Z = np.random.default_rng(seed).normal(size=(6, 2)) * 0.3 + 0j
    w, w1, w2 = poincare_d_solve(T), poincare_d_solve(T1), poincare_d_solve(T2)
    lhs = w.stacked(Z)
    rhs = a * w1.stacked(Z) + b * w2.stacked(Z)
    assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(lhs).max())
    assert d_residual(w1, T1, Z) < 1e-6 * max(1.0, np.abs(T1(Z)).max())


def test_homotopy_alpha_positive(ball):
    a = homotopy_alpha(ball, 50, seed=3)
    assert len(a) == 50 and a.min() > 0.1


# ---------------------------------------------------------------- currents

def test_current_integrals_positivity_guard(ball):
    neg = CurrentField(2, lambda Z: -coordinate_current(2)(Z))
    with pytest.raises(ValueError):
        current_integrals(ball, neg, reinhardt_grid(ball, 0), depth=0.5)


def test_current_integrals_k_dominates_E(ball):
    k, E = current_integrals(ball, coordinate_current(2, 1), reinhardt_grid(ball, 0), depth=0.5)
    assert 0 < E <= k


def test_divisor_integral_linear(ball):
    # int_{|z1| < 1} (1 - |z1|) dA = pi / 3
    assert divisor_integral(ball, Poly(2, {((0, 1), Z0): 1.0})) == pytest.approx(np.pi / 3, rel=1e-6)
    assert divisor_integral(ball, Poly(2, {((1, 0), Z0): 1.0})) == pytest.approx(np.pi / 3, rel=1e-6)


def test_divisor_constant_is_empty(ball):
    h = Poly(2, {(Z0, Z0): 1.0})
    assert divisor_integral(ball, h) == 0.0
    assert np.abs(divisor_current(h, 0.1)(np.array([[0.1, 0.2]]))).max() == 0
    rep = blaschke_check(ball, h, s_list=(0.2,), level=0)
    assert rep.passed


def test_divisor_rejects_non_holomorphic(ball):
    with pytest.raises(ValueError):
        divisor_integral(ball, Poly(2, {(Z0, (0, 1)): 1.0}))
