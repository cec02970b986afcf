import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lincvx.domains import (CATALOG, OutOfCollar, boundary_distance, catalog, check_lineal_convexity,
                            dump_spec, eval_rho, parse_spec, random_box_points, sample_boundary)

coord = st.floats(-1.2, 1.2, allow_nan=False)


def test_eval_rho_values(ball, egg):
    assert eval_rho(ball, [0, 0]) == pytest.approx(-1)
    assert eval_rho(ball, [1, 0], (1, 0), (0, 0)) == pytest.approx(1)
    assert eval_rho(egg, [0, 0.5], (0, 2), (0, 2)) == pytest.approx(4)


def test_eval_rho_rejects_dimension(ball):
    with pytest.raises(ValueError):
        eval_rho(ball, [0, 0, 0])


def test_non_hermitian_rejected():
    from lincvx.domains import DomainSpec
    with pytest.raises(ValueError):
        DomainSpec("bad", 1, {((1,), (0,)): 1.0}, 2, 0.3)


@pytest.mark.parametrize("name", CATALOG)
def test_rho_is_real(name, rng):
    spec = catalog(name)
    z = random_box_points(spec, 200, rng)
    assert np.abs(spec.rho(z).imag).max() < 1e-12


@pytest.mark.parametrize("name", ["BALL2", "EGG24", "EGG226", "TUBE4"])
def test_wirtinger_matches_finite_differences(name, rng):
    spec = catalog(name)
    n, h = spec.n, 1e-4
    z = random_box_points(spec, 100, rng) * 0.7
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        dx = (spec(z + e) - spec(z - e)) / (2 * h)
        dy = (spec(z + 1j * e) - spec(z - 1j * e)) / (2 * h)
        a = [0] * n
        a[i] = 1
        exact = eval_rho(spec, z, a, [0] * n)
        fd = 0.5 * (dx - 1j * dy)
        assert np.allclose(fd, exact, rtol=1e-6, atol=1e-6)


def test_boundary_distance_examples(ball, egg):
    bd = boundary_distance(ball, np.array([0.9, 0]))
    assert bd.delta == pytest.approx(0.1, abs=1e-8)
    assert np.allclose(np.abs(bd.complex_normal), [1, 0])
    assert boundary_distance(ball, np.array([0, 0.5])).delta == pytest.approx(0.5, abs=1e-8)
    # dense boundary mesh oracle
    d = boundary_distance(egg, np.array([0, 0.9])).delta
    r = np.linspace(0, 1, 4001)
    mesh = np.stack([np.sqrt(1 - r ** 4), r], 1)  # radial profile suffices by symmetry
    oracle = np.min(np.hypot(mesh[:, 0], mesh[:, 1] - 0.9))
    assert 0 <= d <= 0.35
    assert d == pytest.approx(oracle, abs=1e-6)


def test_boundary_frame_orthonormal(egg):
    bd = boundary_distance(egg, np.array([0.5, 0.6 + 0.2j]))
    B = np.vstack([bd.complex_normal, bd.tangent_frame])
    assert np.allclose(B @ B.conj().T, np.eye(2), atol=1e-12)


def test_boundary_distance_out_of_collar(ball):
    with pytest.raises(OutOfCollar):
        boundary_distance(ball, np.array([1.5, 0]))


def test_first_order_distance(egg, rng):
    b = sample_boundary(egg, 20, rng)
    nu = egg.dbar(b) / np.linalg.norm(egg.dbar(b), axis=1, keepdims=True)
    z = b - 1e-3 * nu
    for zi in z:
        bd = boundary_distance(egg, zi)
        g = np.linalg.norm(egg.real_grad(zi))
        assert abs(-egg(zi)) == pytest.approx(g * bd.delta, rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(coord, coord, coord, coord, st.floats(-0.01, 0.01), st.floats(-0.01, 0.01))
def test_distance_is_lipschitz(a, b, c, d, ex, ey):
    spec = catalog("BALL2")
    z = np.array([a + 1j * b, c + 1j * d]) * 0.6
    w = z + np.array([ex + 1j * ey, 0])
    vals = np.array([spec(z), spec(w)])
    if vals.max() > 0 or vals.min() < -spec.eta0:  # collar only
        return
    dz = boundary_distance(spec, z).delta
    dw = boundary_distance(spec, w).delta
    assert abs(dz - dw) <= np.linalg.norm(z - w) + 1e-8


@pytest.mark.parametrize("name", ["BALL2", "EGG24"])
def test_lineal_convexity_passes(name):
    rep = check_lineal_convexity(catalog(name), 200, 500)
    assert rep["violations"] == 0


def test_lineal_convexity_negative_control():
    rep = check_lineal_convexity(catalog("NONCONVEX_TEST"), 200, 500)
    assert rep["violations"] > 0


@pytest.mark.parametrize("name", CATALOG)
def test_spec_file_round_trip(name):
    spec = catalog(name)
    text = dump_spec(spec)
    back = parse_spec(text)
    assert back.coeffs == spec.coeffs
    assert (back.n, back.type_bound, back.eta0, back.box) == (spec.n, spec.type_bound, spec.eta0, spec.box)
    assert dump_spec(back) == text
