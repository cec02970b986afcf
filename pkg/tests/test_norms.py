import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lincvx.domains import catalog
from lincvx.geometry import tau
from lincvx.norms import (CurrentField, FormField, combos, current_norms, dbar_of, form_knorm,
                          form_knorm_integral, form_knorm_sup, k_weight, monomial_form)
from lincvx.poly import Poly
from lincvx.quadrature import gauss, reinhardt_grid

DZB2 = monomial_form(2, 1, {(1,): {((0, 0), (0, 0)): 1.0}})
P099 = np.array([0.99, 0], complex)


def test_k_weight_examples(ball, egg):
    assert k_weight(ball, P099, np.array([0, 1])) == pytest.approx(0.1, rel=1e-6)
    assert k_weight(egg, P099, np.array([0, 1])) == pytest.approx(0.01 / 0.01 ** 0.25, rel=1e-6)
    # normal direction: delta / tau_1 with tau_1 from the tau operation
    t1 = tau(ball, P099, np.array([1, 0]), 0.01, eps0=np.inf)
    k = k_weight(ball, P099, np.array([1, 0]))
    assert k == pytest.approx(0.01 / t1, rel=1e-8)
    assert k == pytest.approx(2 * 0.99, rel=0.05)  # 2 |d rho|, complex gradient


def test_k_weight_rejects_boundary(ball):
    with pytest.raises(ValueError):
        k_weight(ball, np.array([1, 0]), np.array([0, 1]))


def test_form_knorm_examples(ball, egg3):
    assert form_knorm(ball, DZB2, P099)[0] == pytest.approx(10, rel=1e-6)
    zero = FormField(2, 1, {})
    assert form_knorm(ball, zero, P099)[0] == 0
    f = monomial_form(3, 2, {(0, 1): {((0, 0, 0), (0, 0, 0)): 1.0}})
    z = np.array([0.99, 0, 0], complex)
    from lincvx.geometry import extremal_basis
    fr = extremal_basis(egg3, z, 0.01, check_collar=False, eps0=np.inf)
    assert form_knorm(egg3, f, z)[0] == pytest.approx(min(fr.radii[0], fr.radii[1]) / 0.01, rel=1e-6)


def test_form_antisymmetry_enforced():
    with pytest.raises(ValueError):
        FormField(2, 2, {(1, 0): Poly(2, {})})


def test_dbar_of_closed():
    f = dbar_of(2, {((0, 0), (1, 1)): 1.0})
    assert f.q == 1
    assert f.is_dbar_closed()
    g = monomial_form(2, 1, {(0,): {((0, 0), (0, 1)): 1.0}})  # zbar2 dzbar1
    assert not g.is_dbar_closed()


def test_form_scaling_exact(egg, rng):
    f = dbar_of(2, {((0, 0), (1, 1)): 1.0, ((1, 0), (0, 2)): 0.5j})
    Z = np.array([[0.5, 0.6j], [0.9, 0.1], [0.2, -0.7]])
    c = 3.0 - 4j
    assert np.allclose(form_knorm(egg, f.scale(c), Z), 5 * form_knorm(egg, f, Z), rtol=1e-14)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4), st.floats(0.3, 0.95), st.floats(0, 6.28))
def test_fast_path_vs_literal_sup(c, r, ph):
    egg = catalog("EGG24")
    f = FormField(2, 1, {(0,): Poly(2, {((0, 0), (0, 0)): c[0] + 1j * c[1]}),
                         (1,): Poly(2, {((0, 0), (0, 0)): c[2] + 1j * c[3]})})
    if np.allclose(c, 0):
        return
    z = np.array([r * np.cos(ph), 0.4 * np.sin(ph)], complex)
    if egg(z) >= -1e-6:
        return
    fast = form_knorm(egg, f, z)[0]
    lit = form_knorm_sup(egg, f, z, n_tuples=500, polish=60)
    assert 1 / 8 <= fast / lit <= 8


def test_knorm_integral_zero_and_refinement(ball):
    g0, g1 = reinhardt_grid(ball, 0), reinhardt_grid(ball, 1)
    assert form_knorm_integral(ball, FormField(2, 1, {}), g0) == 0
    a, b = form_knorm_integral(ball, DZB2, g0), form_knorm_integral(ball, DZB2, g1)
    assert np.isfinite(a) and abs(a - b) / b < 0.01


def test_knorm_integral_rejects_empty(ball):
    from lincvx.quadrature import Grid
    with pytest.raises(ValueError):
        form_knorm_integral(ball, DZB2, Grid(np.zeros((0, 2), complex), np.zeros(0)))


def test_knorm_shell_exponent(ball):
    # shell {delta < eps}: the k-norm of dzbar_2 is ~ delta^{-1/2}, so the shell integral ~ eps^{1/2}
    eps = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    vals = []
    for e in eps:
        u, w = gauss(0.0, 1.0, 24)
        d = e * u ** 2
        wd = w * 2 * e * u
        r = 1 - d
        z = np.stack([r, np.zeros_like(r)], 1).astype(complex)
        vals.append(np.sum(wd * 2 * np.pi ** 2 * r ** 3 * form_knorm(ball, DZB2, z)))
    slope = np.polyfit(np.log(eps), np.log(vals), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.1)


def _coord_current(n, j=0):
    def th(Z):
        out = np.zeros((len(Z), n, n), complex)
        out[:, j, j] = 1
        return out
    return CurrentField(n, th)


def test_current_norm_examples(ball):
    k, E, _ = current_norms(ball, _coord_current(2), P099)
    assert E[0] == pytest.approx(1)
    t1 = tau(ball, P099, np.array([1, 0]), 0.01, eps0=np.inf)
    assert k[0] == pytest.approx((t1 / 0.01) ** 2, rel=1e-8)
    assert k[0] == pytest.approx((1 / (2 * 0.99)) ** 2, rel=0.1)
    zero = CurrentField(2, lambda Z: np.zeros((len(Z), 2, 2), complex))
    k, E, _ = current_norms(ball, zero, P099)
    assert k[0] == 0 and E[0] == 0


def _random_psd(rng, N, n):
    A = rng.normal(size=(N, n, n)) + 1j * rng.normal(size=(N, n, n))
    return A @ np.conj(np.swapaxes(A, 1, 2))


def test_current_trace_bounds_and_diagonal(egg, rng):
    N = 300
    M = _random_psd(rng, N, 2)
    th = CurrentField(2, lambda Z: M[: len(Z)])
    r = rng.uniform(0.3, 0.97, N)
    ph = rng.uniform(0, 2 * np.pi, N)
    Z = np.stack([r * np.cos(ph), 0.5 * r * np.sin(ph) * 1j], 1)
    Z = Z[(egg(Z) < 0) & (egg(Z) > -egg.eta0)]
    k, E, diag = current_norms(egg, th, Z)
    tr = np.einsum("nii->n", M[: len(Z)]).real
    assert np.all(E <= tr * (1 + 1e-12)) and np.all(tr <= 2 * E * (1 + 1e-12))
    ratio = diag / k
    assert np.all((ratio >= 1 / 8) & (ratio <= 8))


def test_current_positivity_and_closedness():
    th = _coord_current(2)
    Z = np.array([[0.1, 0.2], [0.3j, -0.1]])
    assert th.check_positive(Z)
    assert th.closedness_residual(Z) < 1e-8
    neg = CurrentField(2, lambda Z: -np.eye(2)[None].repeat(len(Z), 0).astype(complex))
    assert not neg.check_positive(Z)
    # theta_11 = |z2|^2 is not closed: d_2 theta_11 != d_1 theta_21
    bad = CurrentField(2, lambda Z: np.einsum("n,ij->nij", np.abs(Z[:, 1]) ** 2, np.diag([1, 0])).astype(complex))
    assert bad.closedness_residual(Z) > 1e-3
