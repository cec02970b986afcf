import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lincvx.domains import catalog, random_box_points, sample_boundary
from lincvx.poly import Poly
from lincvx.support import (Support, SupportParams, frame_map, hefer_divide, hefer_q, sigma, support_eval,
                            taylor_poly, verify_local_estimate)

DEF = SupportParams()


def test_sigma_table():
    assert [sigma(j) for j in range(2, 7)] == [-1, 0, 1, 0, -1]


def test_params_validation():
    with pytest.raises(ValueError):
        SupportParams(R=0.2, d=0.1)
    with pytest.raises(ValueError):
        SupportParams(A=Poly(2, {((0, 0), (0, 0)): 0.1}))
    with pytest.raises(ValueError):
        SupportParams(A=Poly(2, {((1, 0), (0, 1)): 0.1}))
    p = SupportParams(A=Poly(2, {((1, 0), (0, 0)): 0.5}))
    assert p.check_A(2) < 0.1


def test_frame_map_examples(ball, rng):
    zeta, U = frame_map(ball, np.array([1, 0]))
    assert np.allclose(zeta + U @ np.array([0.1, 0.2j]), [1.1, 0.2j])
    zeta, U = frame_map(ball, np.array([0, 1]))
    assert np.allclose(np.abs(U[:, 0]), [0, 1])
    assert np.allclose(np.abs(U[:, 1]), [1, 0])
    for _ in range(5):
        b = sample_boundary(ball, 1, rng)[0]
        _, U = frame_map(ball, b)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert abs(np.linalg.norm(U @ v) - np.linalg.norm(v)) < 1e-14
        assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-14)


def test_taylor_examples(ball, egg, rng):
    zeta = rng.normal(size=2) + 1j * rng.normal(size=2)
    p, nrm = taylor_poly(ball, zeta, 2)
    assert nrm == pytest.approx(2)
    assert p.terms == {((1, 0), (1, 0)): 1, ((0, 1), (0, 1)): 1}
    p, nrm = taylor_poly(egg, np.array([1, 0]), 4)
    assert nrm == pytest.approx(1)
    assert set(p.terms) == {((0, 2), (0, 2))}
    assert taylor_poly(ball, zeta, 3)[1] == 0


def test_support_vanishes_on_diagonal(rng):
    for name in ("BALL2", "EGG24", "EGG226", "TUBE4"):
        spec = catalog(name)
        zeta = sample_boundary(spec, 50, rng)
        assert np.abs(support_eval(spec, DEF, zeta, zeta)).max() <= 1e-12


def test_support_ball_closed_form(ball, rng):
    xi = (rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))) * 0.05
    z = np.array([1, 0]) + xi
    S = support_eval(ball, DEF, np.array([1, 0]), z)
    assert np.allclose(S, xi[:, 0] + DEF.K * xi[:, 0] ** 2, atol=1e-13)


def test_support_tube_closed_form(tube, rng):
    xi = (rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))) * 0.05
    S = support_eval(tube, DEF, np.zeros(2), xi)
    # grad rho = (1, 0) in d/dzbar, so the complex normal is e1 and xi = z
    oracle = xi[:, 0] + DEF.K * xi[:, 0] ** 2 - DEF.eps * DEF.M ** 16 * xi[:, 1] ** 4 / 16
    assert np.allclose(S, oracle, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("name", ["BALL2", "EGG24", "EGG226"])
def test_support_holomorphic_in_z(name, rng):
    spec = catalog(name)
    sup = Support(spec)
    zeta = sample_boundary(spec, 20, rng)
    z = zeta + 0.05 * (rng.normal(size=zeta.shape) + 1j * rng.normal(size=zeta.shape))
    h = 1e-5
    for k in range(spec.n):
        e = np.zeros(spec.n)
        e[k] = h
        dx = (sup(z + e, zeta) - sup(z - e, zeta)) / (2 * h)
        dy = (sup(z + 1j * e, zeta) - sup(z - 1j * e, zeta)) / (2 * h)
        dbar = 0.5 * (dx + 1j * dy)
        assert np.abs(dbar).max() < 1e-6
        assert np.allclose(0.5 * (dx - 1j * dy), sup.grad(z, zeta)[:, k], atol=1e-6)


@pytest.mark.parametrize("name", ["EGG24", "EGG226"])
def test_support_degree_bound(name, rng):
    spec = catalog(name)
    sup = Support(spec)
    zeta = sample_boundary(spec, 1, rng)[0]
    v = rng.normal(size=spec.n) + 1j * rng.normal(size=spec.n)
    deg = spec.type_bound
    t = np.linspace(-0.2, 0.2, deg + 2)
    vals = sup(zeta + t[:, None] * v, zeta)
    c = np.polyfit(t, vals, deg)
    assert np.abs(np.polyval(c, t) - vals).max() < 1e-9


@pytest.mark.parametrize("name", ["BALL2", "EGG24", "EGG226"])
def test_hefer_residual(name, rng):
    spec = catalog(name)
    sup = Support(spec)
    zeta = random_box_points(spec, 1000, rng) * 0.6
    zeta = zeta[np.linalg.norm(spec.dbar(zeta), axis=1) > 1e-3]
    z = zeta + 0.3 * (rng.normal(size=zeta.shape) + 1j * rng.normal(size=zeta.shape))
    Q = hefer_q(sup, z, zeta)
    res = np.abs(sup(z, zeta) - (Q * (z - zeta)).sum(1))
    assert res.max() < 1e-12


def test_hefer_divide_examples(ball, rng):
    zeta = np.array([1, 0], complex)
    hd = hefer_divide(ball, DEF, zeta)
    xi = (rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))) * 0.1
    Q = hd(zeta + xi)
    assert np.allclose(Q[:, 0], 1 + DEF.K * xi[:, 0], atol=1e-13)
    assert np.allclose(Q[:, 1], 0, atol=1e-13)
    # z = zeta: every term Q_i (z_i - zeta_i) vanishes
    assert np.abs(hd(zeta[None]) * 0).max() == 0 and hd.support(zeta, zeta) == 0


def test_hefer_with_A(egg, rng):
    A = Poly(2, {((1, 0), (0, 0)): 0.3, ((0, 2), (0, 0)): 0.2j})
    params = SupportParams(A=A)
    sup = Support(egg, params)
    zeta = sample_boundary(egg, 50, rng)
    z = zeta + 0.05 * (rng.normal(size=zeta.shape) + 1j * rng.normal(size=zeta.shape))
    Q = hefer_q(sup, z, zeta)
    assert np.abs(sup(z, zeta) - (Q * (z - zeta)).sum(1)).max() < 1e-12
    assert np.abs(sup(zeta, zeta)).max() < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
def test_hefer_identity_property(a, b, c, d):
    spec = catalog("EGG24")
    sup = Support(spec)
    zeta = np.array([np.sqrt(1 - 0.5 ** 4), 0.5])
    z = zeta + np.array([a + 1j * b, c + 1j * d])
    Q = hefer_q(sup, z, zeta)
    assert abs(sup(z, zeta) - (Q * (z - zeta)).sum()) < 1e-12


@pytest.mark.parametrize("name", ["BALL2", "EGG24", "EGG226"])
def test_local_estimate_defaults(name):
    rep = verify_local_estimate(catalog(name), DEF, n_samples=4000)
    assert rep.passed and rep.c_fit > 0 and rep.h_min > 0


def test_local_estimate_tube(tube):
    # with eps M^16 large the sign-indefinite quartic term dominates: the estimate must fail
    assert not verify_local_estimate(tube, DEF, n_samples=4000).passed
    assert verify_local_estimate(tube, SupportParams(M=4, eps=1e-10), n_samples=4000).passed
    assert verify_local_estimate(tube, SupportParams(M=1, eps=1e-2), n_samples=4000).passed


def test_local_estimate_normal_only(ball):
    # w2 = 0: P-sum vanishes, Re S0 <= (rho(z) - rho(zeta)) h
    sup = Support(ball)
    zeta = np.array([1, 0], complex)
    w1 = np.linspace(-0.09, -0.001, 30)
    z = np.stack([1 + w1, np.zeros_like(w1)], 1)
    L = sup(z, zeta).real
    B = ball(z) - ball(zeta)
    assert np.all(L <= B * 0.1)
