"""Holomorphic support polynomial S0, its local estimate, and the Hefer division."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .domains import DomainSpec, complex_normal, sample_boundary
from .poly import Poly


def sigma(j: int) -> int:
    return {0: 1, 2: -1}.get(j % 4, 0)


@dataclass
class SupportParams:
    M: float = 4.0
    K: float = 8.0
    eps: float = 1e-2
    A: Poly | None = None  # holomorphic polynomial in frame coordinates w, A(0) = 0
    R: float = 0.08
    d: float = 0.1

    def __post_init__(self):
        if not self.R < self.d:
            raise ValueError("patch radius R must be smaller than the estimate radius d")
        if self.A is not None:
            if any(any(b) for (_, b) in self.A.terms):
                raise ValueError("A must be holomorphic")
            if abs(self.A(np.zeros(self.A.n))) > 0:
                raise ValueError("A(0) must vanish")

    def check_A(self, n: int, samples: int = 2000, seed: int = 0) -> float:
        """max |A(w)| over |w| < R (must be < 0.1)."""
        if self.A is None:
            return 0.0
        rng = np.random.default_rng(seed)
        w = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
        w *= (self.R * rng.uniform(size=(samples, 1)) ** (1 / (2 * n))) / np.linalg.norm(w, axis=1, keepdims=True)
        return float(np.abs(self.A(w)).max())

    def to_dict(self) -> dict:
        return {"M": self.M, "K": self.K, "eps": self.eps, "R": self.R, "d": self.d,
                "A": None if self.A is None else {str(k): [v.real, v.imag] for k, v in self.A.terms.items()}}


def frame_unitary(nu: np.ndarray) -> np.ndarray:
    """Unitary U (..., n, n) with first column nu; remaining columns by Gram-Schmidt
    on coordinate vectors e_k taken in order of increasing |nu_k| (stable ties)."""
    nu = np.asarray(nu, dtype=complex)
    flat = nu.reshape(-1, nu.shape[-1])
    N, n = flat.shape
    U = np.zeros((N, n, n), dtype=complex)
    U[:, :, 0] = flat
    order = np.argsort(np.abs(flat), axis=1, kind="stable")
    filled = np.ones(N, dtype=int)
    for pos in range(n):
        e = np.zeros((N, n), dtype=complex)
        e[np.arange(N), order[:, pos]] = 1
        for c in range(n):
            col = U[:, :, c]
            active = c < filled
            e = e - np.where(active[:, None], (np.conj(col) * e).sum(1)[:, None] * col, 0)
        nrm = np.linalg.norm(e, axis=1)
        take = (nrm > 1e-8) & (filled < n)
        idx = np.flatnonzero(take)
        U[idx, :, filled[idx]] = e[idx] / nrm[idx, None]
        filled[idx] += 1
    return U.reshape(nu.shape[:-1] + (n, n))


def frame_map(spec: DomainSpec, zeta):
    """(zeta, U): l_zeta(xi) = zeta + U xi, U unitary with U e_1 = complex normal."""
    zeta = np.asarray(zeta, dtype=complex)
    return zeta, frame_unitary(complex_normal(spec, zeta))


def taylor_poly(spec: DomainSpec, zeta, j: int) -> tuple[Poly, float]:
    """Homogeneous degree-j Taylor slice of rho at zeta, in w = z - zeta, and its l1 norm."""
    from .poly import multi_indices, mfact
    zeta = np.asarray(zeta, dtype=complex)
    n = spec.n
    terms = {}
    for k in range(j + 1):
        for a in multi_indices(n, k):
            for b in multi_indices(n, j - k):
                c = complex(spec.deriv(a, b)(zeta)) / (mfact(a) * mfact(b))
                if c != 0:
                    terms[(a, b)] = c
    p = Poly(n, terms)
    return p, float(np.abs(p.c).sum()) if p.terms else 0.0


class Support:
    """Vectorized S0(z, zeta) and its z-gradient for a domain and parameter set.

    With A = 0: S0 = xi1 + K xi1^2 - eps sum_j M^{2^j} sigma_j T_j(Delta_tan),
    xi1 = <Delta, nu>, Delta_tan = Delta - xi1 nu, and T_j the degree-j pure
    holomorphic Taylor part of rho at zeta (read off the line restriction).
    """

    def __init__(self, spec: DomainSpec, params: SupportParams | None = None):
        self.spec = spec
        self.params = params or SupportParams()
        self.jmax = spec.type_bound
        n = spec.n
        e = np.eye(n, dtype=int)
        zero = (0,) * n
        self._drho = [spec.deriv(e[l], zero) for l in range(n)]

    def _weights(self):
        p = self.params
        return {j: p.eps * p.M ** (2 ** j) * sigma(j) for j in range(2, self.jmax + 1) if sigma(j)}

    def _xi1(self, nu, D, U=None):
        xi1 = (np.conj(nu) * D).sum(-1)
        A = self.params.A
        if A is None:
            return xi1, np.conj(nu) * np.ones_like(D)
        w = (D[..., :, None] * np.conj(U)).sum(-2)  # w = U^H D
        a = A(w)
        grad_w = np.stack([A.deriv(np.eye(A.n, dtype=int)[k], (0,) * A.n)(w) for k in range(A.n)], -1)
        grad_z = (grad_w[..., None, :] * np.conj(U)).sum(-1)  # d a / d z_i = sum_k dA_k conj(U_ik)
        return xi1 * (1 - a), np.conj(nu) * (1 - a)[..., None] - xi1[..., None] * grad_z

    def normal(self, zeta):
        return complex_normal(self.spec, zeta)

    def __call__(self, z, zeta, nu=None) -> np.ndarray:
        z, zeta = np.broadcast_arrays(np.asarray(z, complex), np.asarray(zeta, complex))
        nu = self.normal(zeta) if nu is None else nu
        D = z - zeta
        U = frame_unitary(nu) if self.params.A is not None else None
        xi1, _ = self._xi1(nu, D, U)
        Dt = D - ((np.conj(nu) * D).sum(-1))[..., None] * nu
        out = xi1 + self.params.K * xi1 ** 2
        ws = self._weights()
        if ws:
            C = self.spec.rho.line_coeffs(zeta, Dt)
            for j, wj in ws.items():
                if j < C.shape[-1]:
                    out = out - wj * C[..., j, 0]
        return out

    def grad(self, z, zeta, nu=None) -> np.ndarray:
        """dS0/dz_i, shape (..., n)."""
        z, zeta = np.broadcast_arrays(np.asarray(z, complex), np.asarray(zeta, complex))
        nu = self.normal(zeta) if nu is None else nu
        D = z - zeta
        U = frame_unitary(nu) if self.params.A is not None else None
        xi1, dxi1 = self._xi1(nu, D, U)
        out = (1 + 2 * self.params.K * xi1)[..., None] * dxi1
        ws = self._weights()
        if ws:
            n = self.spec.n
            Dt = D - ((np.conj(nu) * D).sum(-1))[..., None] * nu
            # grad of T_j at Dt: degree (j-1) holomorphic part of d rho / d z_l
            gT = {j: np.zeros(D.shape, complex) for j in ws}
            for l in range(n):
                C = self._drho[l].line_coeffs(zeta, Dt)
                for j in ws:
                    if j - 1 < C.shape[-1]:
                        gT[j][..., l] = C[..., j - 1, 0]
            for j, wj in ws.items():
                g = gT[j]
                # chain rule through the projection Delta_tan = (I - nu nu^H) Delta
                proj = g - ((g * nu).sum(-1))[..., None] * np.conj(nu)
                out = out - wj * proj
        return out


def support_eval(spec: DomainSpec, params: SupportParams, zeta, z) -> np.ndarray:
    return Support(spec, params)(z, zeta)


@dataclass
class HeferDecomposition:
    support: Support
    zeta: np.ndarray
    nodes: int

    def __call__(self, z) -> np.ndarray:
        """Q_i^0(z, zeta), shape (..., n)."""
        return hefer_q(self.support, z, self.zeta, self.nodes)


def hefer_q(sup: Support, z, zeta, nodes: int | None = None, nu=None) -> np.ndarray:
    """Q_i^0(z, zeta) = int_0^1 dS0/dz_i(zeta + t (z - zeta), zeta) dt (Gauss-Legendre)."""
    z, zeta = np.broadcast_arrays(np.asarray(z, complex), np.asarray(zeta, complex))
    if nodes is None:
        deg = max(2, sup.jmax)
        if sup.params.A is not None:
            deg += 2 * sup.params.A.degree
        nodes = (deg + 1) // 2 + 1
    x, w = leggauss(nodes)
    t, w = (x + 1) / 2, w / 2
    nu = sup.normal(zeta) if nu is None else nu
    out = 0
    for tk, wk in zip(t, w):
        out = out + wk * sup.grad(zeta + tk * (z - zeta), zeta, nu)
    return out


def hefer_divide(spec: DomainSpec, params: SupportParams, zeta) -> HeferDecomposition:
    sup = Support(spec, params)
    deg = max(2, sup.jmax) + (2 * params.A.degree if params.A is not None else 0)
    return HeferDecomposition(sup, np.asarray(zeta, complex), (deg + 1) // 2 + 1)


@dataclass
class LocalEstimateReport:
    domain: str
    params: dict
    n_samples: int
    h_min: float
    h_needed: float
    c_fit: float
    c_max: float
    worst_margin: float
    failures: int
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _random_unit_tangent(nu, rng):
    n = nu.shape[-1]
    v = rng.normal(size=nu.shape) + 1j * rng.normal(size=nu.shape)
    v = v - (np.conj(nu) * v).sum(-1, keepdims=True) * nu
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def verify_local_estimate(spec: DomainSpec, params: SupportParams | None = None,
                          n_samples: int = 10_000, seed: int = 0, radius: float | None = None,
                          n_zeta: int = 200) -> LocalEstimateReport:
    """Fit (h_min, c) in Re S0 <= (rho(z) - rho(zeta)) h - eps c sum_j ||P^j_{zeta,t}|| |w2|^j.

    Samples: zeta on the boundary, t a random unit tangent, |(w1, w2)| < d.
    ||P^j_{zeta,t}|| is the coefficient l1 norm of lam -> P^j_zeta(zeta + lam t),
    j = 2 .. type bound. With c = c_max / 2 the report gives h_min =
    min over rho(z) < rho(zeta) of (Re S0 + eps c P) / (rho(z) - rho(zeta)).
    """
    params = params or SupportParams()
    sup = Support(spec, params)
    rng = np.random.default_rng(seed)
    d = params.d if radius is None else radius
    zb = sample_boundary(spec, n_zeta, rng)
    idx = rng.integers(0, len(zb), n_samples)
    zeta = zb[idx]
    nu = complex_normal(spec, zeta)
    t = _random_unit_tangent(nu, rng)
    w = rng.normal(size=(n_samples, 2)) + 1j * rng.normal(size=(n_samples, 2))
    w *= (d * rng.uniform(size=(n_samples, 1)) ** 0.25) / np.linalg.norm(w, axis=1, keepdims=True)
    # a quarter of the samples purely normal, a quarter purely tangential
    q = n_samples // 4
    w[:q, 1] = 0
    w[q:2 * q, 0] = 0
    z = zeta + w[:, :1] * nu + w[:, 1:] * t
    L = sup(z, zeta, nu).real
    B = spec(z) - spec(zeta)
    C = spec.rho.line_coeffs(zeta, t)
    P = np.zeros(n_samples)
    aw2 = np.abs(w[:, 1])
    for j in range(2, spec.type_bound + 1):
        nj = sum(np.abs(C[:, a, j - a]) for a in range(j + 1) if a < C.shape[1] and j - a < C.shape[2])
        P += nj * aw2 ** j
    eps = params.eps
    inside = B < 0
    zero = np.abs(B) <= 1e-14
    mask = (inside | zero) & (P > 0)
    c_max = float(np.min(-L[mask] / (eps * P[mask]))) if mask.any() else np.inf
    c_fit = 0.5 * c_max if np.isfinite(c_max) else 1.0
    rhs = L + eps * c_fit * P
    h_min = float(np.min(rhs[inside] / B[inside])) if inside.any() else np.inf
    out = B > 1e-14
    h_needed = float(np.max(rhs[out] / B[out])) if out.any() else 0.0
    # with h = h_min inside and h = max(h_needed, h_min) outside the inequality holds
    h_out = max(h_needed, h_min, 0.0)
    h = np.where(inside, h_min, h_out)
    margin = B * h - eps * c_fit * P - L
    failures = int(np.sum(margin < -1e-12 * (1 + np.abs(L))))
    passed = bool(c_fit > 0 and h_min > 0 and failures == 0)
    return LocalEstimateReport(spec.name, params.to_dict(), n_samples, h_min, h_needed, c_fit, c_max,
                               float(margin.min()), failures, passed)
