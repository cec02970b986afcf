"""Anisotropic k-norms of (0,q)-forms and (1,1)-currents."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .domains import DomainSpec, distance_field
from .geometry import extremal_frames, tau_many
from .poly import Poly


def combos(n: int, q: int) -> list[tuple]:
    return list(combinations(range(n), q))


def _insert_sign(j: int, I: tuple) -> tuple[int, tuple]:
    """dzbar_j ^ dzbar^I = sign dzbar^{J}, J sorted; sign 0 if j in I."""
    if j in I:
        return 0, I
    return (-1) ** sum(i < j for i in I), tuple(sorted(I + (j,)))


@dataclass
class FormField:
    """f = sum_I a_I dzbar^I with a_I polynomial in (z, zbar) or given by a callable.

    ``coeffs`` maps increasing index tuples I (|I| = q) to Poly or to callables
    Z (N, n) -> (N,). Missing indices are zero.
    """
    n: int
    q: int
    coeffs: dict

    def __post_init__(self):
        for I in self.coeffs:
            if len(I) != self.q or list(I) != sorted(set(I)):
                raise ValueError(f"bad multi-index {I} for q = {self.q}")

    @property
    def polynomial(self) -> bool:
        return all(isinstance(c, Poly) for c in self.coeffs.values())

    def __call__(self, Z) -> np.ndarray:
        """Coefficients (N, C(n, q)) in the order of combos(n, q)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        out = np.zeros((len(Z), len(combos(self.n, self.q))), dtype=complex)
        for k, I in enumerate(combos(self.n, self.q)):
            if I in self.coeffs:
                out[:, k] = self.coeffs[I](Z)
        return out

    def scale(self, c) -> "FormField":
        new = {}
        for I, a in self.coeffs.items():
            if isinstance(a, Poly):
                new[I] = Poly(a.n, {k: c * v for k, v in a.terms.items()})
            else:
                new[I] = (lambda Z, a=a: c * a(Z))
        return FormField(self.n, self.q, new)

    def dbar(self) -> "FormField":
        """Exact dbar for polynomial coefficients."""
        if not self.polynomial:
            raise TypeError("exact dbar needs polynomial coefficients")
        out: dict = {}
        e = np.eye(self.n, dtype=int)
        zero = (0,) * self.n
        for I, a in self.coeffs.items():
            for j in range(self.n):
                sgn, J = _insert_sign(j, I)
                if not sgn:
                    continue
                da = a.deriv(zero, e[j])
                term = Poly(self.n, {k: sgn * v for k, v in da.terms.items()})
                out[J] = out[J] + term if J in out else term
        return FormField(self.n, self.q + 1, out)

    def is_dbar_closed(self, tol: float = 1e-12) -> bool:
        if self.q == self.n:
            return True
        d = self.dbar()
        return all(np.max(np.abs(c.c), initial=0) <= tol for c in d.coeffs.values())


def monomial_form(n: int, q: int, terms: dict) -> FormField:
    """FormField from {I: {(alpha, beta): c}} monomial dictionaries."""
    return FormField(n, q, {tuple(I): Poly(n, t) for I, t in terms.items()})


def dbar_of(n: int, poly_terms: dict) -> FormField:
    """The (0,1)-form dbar g of a polynomial g (automatically dbar-closed)."""
    return FormField(n, 0, {(): Poly(n, poly_terms)}).dbar()


def frame_coefficients(a: np.ndarray, V: np.ndarray, n: int, q: int) -> np.ndarray:
    """a'_K = <f; v_K> = sum_I a_I det(conj(V)[K, I]) for all K; V rows are frame vectors."""
    Is = combos(n, q)
    Vb = np.conj(V)
    out = np.zeros_like(a)
    for k, K in enumerate(Is):
        for i, I in enumerate(Is):
            sub = Vb[..., list(K), :][..., list(I)]
            out[:, k] += a[:, i] * (np.linalg.det(sub) if q else 1.0)
    return out


def _frames_at(spec, Z, delta):
    return extremal_frames(spec, Z, delta, eps0=np.inf)


def k_weight(spec: DomainSpec, z, v) -> float:
    """k(z, v) = delta(z) / tau(z, v, delta(z))."""
    z = np.asarray(z, dtype=complex)
    delta, _ = distance_field(spec, z[None])
    d = float(delta[0])
    if not d > 0 or spec(z) >= 0:
        raise ValueError("k-weight undefined on or outside the boundary")
    return d / float(tau_many(spec, z, np.asarray(v)[None], d, eps0=np.inf)[0])


def form_knorm(spec: DomainSpec, f: FormField, Z, delta=None) -> np.ndarray:
    """Fast path: max_K |a'_K| min_{i in K} tau_i / delta in the extremal frame at (z, delta)."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if delta is None:
        delta, _ = distance_field(spec, Z)
    delta = np.asarray(delta, float)
    if np.any(~(delta > 0)) or np.any(spec(Z) >= 0):
        raise ValueError("k-norm undefined on or outside the boundary")
    a = f(Z)
    if f.q == 0:
        return np.abs(a[:, 0])
    V, tau = _frames_at(spec, Z, delta)
    ap = frame_coefficients(a, V, f.n, f.q)
    w = np.stack([tau[:, list(K)].min(1) for K in combos(f.n, f.q)], -1) / delta[:, None]
    return np.max(np.abs(ap) * w, axis=1)


def form_knorm_sup(spec: DomainSpec, f: FormField, z, n_tuples: int = 10_000, seed: int = 0,
                   polish: int = 200) -> float:
    """Literal sup over unit tuples of |<f; v_1..v_q>| / sum_i k(z, v_i) (sampling + hill climb)."""
    z = np.asarray(z, dtype=complex)
    rng = np.random.default_rng(seed)
    delta, _ = distance_field(spec, z[None])
    d = float(delta[0])
    n, q = f.n, f.q
    a = f(z[None])[0]
    Is = combos(n, q)
    V, _ = _frames_at(spec, z[None], delta)
    V = V[0]

    def value(T):  # T (M, q, n) unit tuples
        vals = np.zeros(len(T), dtype=complex)
        for i, I in enumerate(Is):
            vals += a[i] * np.linalg.det(np.conj(T)[:, :, list(I)])
        t = tau_many(spec, z, T.reshape(-1, n), d, eps0=np.inf, rtol=1e-8).reshape(len(T), q)
        return np.abs(vals) / (d / t).sum(1)

    T = rng.normal(size=(n_tuples, q, n)) + 1j * rng.normal(size=(n_tuples, q, n))
    # frame-aligned candidates: the tuples realising the fast path
    T = np.concatenate([T, np.stack([V[list(K)] for K in Is])])
    T /= np.linalg.norm(T, axis=-1, keepdims=True)
    vals = value(T)
    best, bv = T[np.argmax(vals)], vals.max()
    step = 0.1
    for _ in range(polish // 20):
        cand = best + step * (rng.normal(size=(20, q, n)) + 1j * rng.normal(size=(20, q, n)))
        cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
        cv = value(cand)
        if cv.max() > bv:
            best, bv = cand[np.argmax(cv)], cv.max()
        else:
            step *= 0.5
    return float(bv)


def form_knorm_integral(spec: DomainSpec, f: FormField, grid) -> float:
    if len(grid) == 0:
        raise ValueError("empty grid")
    return float(np.dot(grid.weights, form_knorm(spec, f, grid.points)))


@dataclass
class CurrentField:
    """Theta = i sum theta_jk dz_j ^ dzbar_k, theta(Z) -> (N, n, n) Hermitian."""
    n: int
    theta: callable
    closed: bool = True

    def __call__(self, Z) -> np.ndarray:
        return self.theta(np.atleast_2d(np.asarray(Z, dtype=complex)))

    def check_positive(self, Z, tol: float = 1e-10) -> bool:
        th = self(Z)
        if np.abs(th - np.conj(np.swapaxes(th, -1, -2))).max(initial=0) > 1e-10:
            return False
        return bool(np.linalg.eigvalsh(th).min(initial=0) >= -tol)

    def closedness_residual(self, Z, h: float = 1e-5) -> float:
        """max |d_l theta_jk - d_j theta_lk| + |dbar_l theta_jk - dbar_k theta_jl| by central differences."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        n = self.n
        dz, dzb = [], []
        for l in range(n):
            e = np.zeros(n, complex)
            e[l] = h
            dx = (self(Z + e) - self(Z - e)) / (2 * h)
            dy = (self(Z + 1j * e) - self(Z - 1j * e)) / (2 * h)
            dz.append(0.5 * (dx - 1j * dy))
            dzb.append(0.5 * (dx + 1j * dy))
        res = 0.0
        for j in range(n):
            for l in range(n):
                for k in range(n):
                    res = max(res, np.abs(dz[l][:, j, k] - dz[j][:, l, k]).max())
                    res = max(res, np.abs(dzb[l][:, j, k] - dzb[k][:, j, l]).max())
        return float(res)


def current_norms(spec: DomainSpec, theta: CurrentField, Z, delta=None):
    """(||Theta||_k, ||Theta||_E, diagonal sum) at each point of Z."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    if delta is None:
        delta, _ = distance_field(spec, Z)
    delta = np.asarray(delta, float)
    if np.any(~(delta > 0)):
        raise ValueError("current k-norm undefined on the boundary")
    th = theta(Z)
    E = np.linalg.norm(th, ord=2, axis=(-2, -1))
    V, tau = _frames_at(spec, Z, delta)
    thp = V @ th @ np.conj(np.swapaxes(V, -1, -2))  # theta'_lm = theta(v_l, v_m)
    s = tau / delta[:, None]
    M = s[:, :, None] * thp * s[:, None, :]
    k = np.linalg.norm(M, ord=2, axis=(-2, -1))
    diag = np.einsum("nll->n", M).real
    return k, E, diag
