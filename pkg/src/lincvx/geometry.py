"""Anisotropic radii tau, extremal frames, polydiscs and the pseudodistance."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .domains import DomainSpec, OutOfCollar, complex_normal, sample_boundary, tangent_frame
from .poly import compose_affine

EPS0 = 0.1
C0 = 0.125


class UnboundedDirection(ValueError):
    """tau bracket exceeded the sample box: rho barely varies along this line."""


def _trig_coeffs(C: np.ndarray) -> np.ndarray:
    """Group line coefficients C[..., a, b] by frequency a - b.

    Returns G[..., k + d, p] = sum over a - b = k, a + b = p of C_ab, so that
    rho(zeta + r e^{it} v) - rho(zeta) = sum_{k,p} G_kp r^p e^{ikt}.
    """
    d = C.shape[-1] - 1
    G = np.zeros(C.shape[:-2] + (2 * d + 1, 2 * d + 1), dtype=complex)
    for a in range(d + 1):
        for b in range(d + 1):
            if a or b:
                G[..., a - b + d, a + b] += C[..., a, b]
    return G


class _CircleMax:
    """max_{|lam| = r} |rho(zeta + lam v) - rho(zeta)| for a batch of lines."""

    def __init__(self, C: np.ndarray, n_angles: int = 96, polish: int = 3):
        self.G = _trig_coeffs(C)
        d = C.shape[-1] - 1
        self.k = np.arange(-d, d + 1)
        self.p = np.arange(2 * d + 1)
        self.t = np.linspace(0, 2 * np.pi, n_angles, endpoint=False)
        self.E = np.exp(1j * np.outer(self.k, self.t))  # (K, T)
        self.polish = polish

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        F = np.einsum("...kp,...p->...k", self.G, r[..., None] ** self.p)  # Fourier coeffs
        vals = (F @ self.E).real
        j = np.argmax(np.abs(vals), axis=-1)
        best = np.take_along_axis(np.abs(vals), j[..., None], -1)[..., 0]
        t = self.t[j]
        for _ in range(self.polish):
            e = np.exp(1j * self.k * t[..., None])
            g1 = (1j * self.k * F * e).sum(-1).real
            g2 = (-(self.k ** 2) * F * e).sum(-1).real
            # Newton on g' for the extremum of g (sign of g does not matter)
            step = np.where(np.abs(g2) > 1e-300, g1 / np.where(g2 == 0, 1, g2), 0.0)
            t = t - np.clip(step, -0.1, 0.1)
            val = np.abs((F * np.exp(1j * self.k * t[..., None])).sum(-1).real)
            best = np.maximum(best, val)
        return best


def disc_max(spec: DomainSpec, zeta, v, r) -> np.ndarray:
    """max_{|lam| = r} |rho(zeta + lam v) - rho(zeta)|; v of shape (..., n)."""
    C = spec.rho.line_coeffs(zeta, v)
    return _CircleMax(C)(np.broadcast_to(np.asarray(r, float), C.shape[:-2]))


def tau_many(spec: DomainSpec, zeta, V, eps, eps0: float | None = None,
             rtol: float = 1e-10, n_angles: int = 96) -> np.ndarray:
    """tau(zeta, v, eps) for a batch of directions V of shape (D, n).

    ``zeta`` is one point (n,) or a batch (D, n); ``eps`` a scalar or (D,).
    Directions need not be unit: tau(zeta, t v, eps) = tau(zeta, v, eps) / t.
    Unbounded directions get +inf.
    """
    eps0 = EPS0 if eps0 is None else eps0
    eps = np.asarray(eps, dtype=float)
    if np.any(eps > eps0 * (1 + 1e-12)):
        raise ValueError(f"eps = {eps.max()} exceeds eps0 = {eps0}")
    if np.any(eps <= 0):
        raise ValueError("eps must be positive")
    V = np.atleast_2d(np.asarray(V, dtype=complex))
    zeta = np.asarray(zeta, dtype=complex)
    D = max(len(V), zeta.shape[0] if zeta.ndim == 2 else 1)
    V = np.broadcast_to(V, (D, spec.n))
    scale = np.linalg.norm(V, axis=-1)
    U = V / scale[:, None]
    cm = _CircleMax(spec.rho.line_coeffs(zeta, U), n_angles=n_angles)
    hi = np.ones(D)
    rmax = 8.0 * spec.box
    for _ in range(80):
        up = cm(hi) < eps
        if not up.any():
            break
        hi = np.where(up, hi * 2, hi)
        if np.all(hi[up] > rmax):
            break
    unbounded = cm(hi) < eps
    lo = np.full(D, 1e-14)
    # geometric bisection: relative accuracy independent of the size of tau
    for _ in range(200):
        if np.all(hi / lo - 1 < rtol):
            break
        mid = np.sqrt(lo * hi)
        below = cm(mid) < eps
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = np.sqrt(lo * hi) / scale
    out[unbounded] = np.inf
    return out


def tau(spec: DomainSpec, zeta, v, eps, eps0: float | None = None) -> float:
    out = float(tau_many(spec, zeta, np.asarray(v)[None], eps, eps0)[0])
    if not np.isfinite(out):
        raise UnboundedDirection("tau exceeds the sample box")
    return out


@dataclass
class ExtremalFrame:
    zeta: np.ndarray
    eps: float
    vectors: np.ndarray  # rows v_1..v_n
    radii: np.ndarray

    def coords(self, z) -> np.ndarray:
        """Frame coordinates lam_k = <z - zeta, v_k>."""
        return (np.asarray(z, dtype=complex) - self.zeta) @ np.conj(self.vectors).T


@dataclass
class Polydisc:
    frame: ExtremalFrame
    dilation: float = 1.0
    c0: float = C0

    def contains(self, z) -> np.ndarray:
        lam = self.frame.coords(z)
        return np.all(np.abs(lam) <= self.c0 * self.dilation * self.frame.radii, axis=-1)

    def ratio(self, z) -> np.ndarray:
        """Smallest dilation A with z in A P (the coordinate-box gauge)."""
        lam = self.frame.coords(z)
        return np.max(np.abs(lam) / (self.c0 * self.frame.radii), axis=-1)


def _sphere_grid(T: np.ndarray, res: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors cos(a) T0 + sin(a) e^{i phi} T1 on the projective line of span(T)."""
    a = (np.arange(res) + 0.5) * (np.pi / 2) / res
    phi = np.arange(res) * 2 * np.pi / res
    A, P = np.meshgrid(a, phi, indexing="ij")
    params = np.stack([A.ravel(), P.ravel()], -1)
    return params, _sphere_point(T, params)


def _sphere_point(T, params):
    params = np.atleast_2d(params)
    a, phi = params[:, 0], params[:, 1]
    return np.cos(a)[:, None] * T[0] + (np.sin(a) * np.exp(1j * phi))[:, None] * T[1]


def extremal_basis(spec: DomainSpec, zeta, eps, grid: int = 64, eps0: float | None = None,
                   check_collar: bool = True) -> ExtremalFrame:
    zeta = np.asarray(zeta, dtype=complex)
    if check_collar:
        r = float(spec(zeta))
        if r > spec.eta0 or r < -spec.eta0:
            raise OutOfCollar(f"rho(zeta) = {r:.3g} outside the collar")
    nu = complex_normal(spec, zeta)
    T = tangent_frame(nu)
    if spec.n == 1:
        vecs = nu[None]
    elif spec.n == 2:
        vecs = np.array([nu, T[0]])
    else:
        params, U = _sphere_grid(T, grid)
        t = tau_many(spec, zeta, U, eps, eps0, rtol=1e-7, n_angles=64)
        order = np.lexsort((params[:, 1], params[:, 0], t))  # ties: smallest parameters
        x0 = params[order[0]]

        def f(p):
            return float(tau_many(spec, zeta, _sphere_point(T, p), eps, eps0, rtol=1e-9)[0])

        res = minimize(f, x0, method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 400})
        best = res.x if res.fun <= t[order[0]] else x0
        a, phi = best
        v2 = _sphere_point(T, best)[0]
        v3 = -np.sin(a) * T[0] + np.cos(a) * np.exp(1j * phi) * T[1]
        vecs = np.array([nu, v2, v3])
    radii = tau_many(spec, zeta, vecs, eps, eps0)
    if spec.n == 3 and radii[2] < radii[1]:
        # local polish landed on the larger radius; keep the greedy order
        vecs = vecs[[0, 2, 1]]
        radii = radii[[0, 2, 1]]
    return ExtremalFrame(zeta=zeta, eps=float(eps), vectors=vecs, radii=radii)


def extremal_frames(spec: DomainSpec, Z, eps, grid: int = 32, eps0: float | None = None):
    """Frames at many points. Returns (vectors (N, n, n), radii (N, n)).

    For n = 2 the frame is (nu, nu^perp) with no search; this is vectorized.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    eps = np.broadcast_to(np.asarray(eps, float), Z.shape[:1])
    N, n = Z.shape
    if n == 2:
        nu = complex_normal(spec, Z)
        t = np.stack([-np.conj(nu[:, 1]), np.conj(nu[:, 0])], -1)
        vecs = np.stack([nu, t], 1)
        radii = np.stack([tau_many(spec, Z, vecs[:, k], eps, eps0) for k in range(2)], -1)
        return vecs, radii
    vecs = np.empty((N, n, n), dtype=complex)
    radii = np.empty((N, n))
    for i in range(N):
        fr = extremal_basis(spec, Z[i], eps[i], grid=grid, eps0=eps0, check_collar=False)
        vecs[i], radii[i] = fr.vectors, fr.radii
    return vecs, radii


def polydisc(spec: DomainSpec, zeta, eps, A: float = 1.0, c0: float = C0, **kw) -> Polydisc:
    return Polydisc(extremal_basis(spec, zeta, eps, **kw), A, c0)


def _line_max_inverse(spec, zeta, v, r):
    """eps such that tau(zeta, v, eps) = r: the disc max of the increment at radius r."""
    C = spec.rho.line_coeffs(zeta, v)
    cm = _CircleMax(C, n_angles=256, polish=4)
    # the disc max is the running max over radii; sample to guard non-monotone lines
    rs = np.asarray(r, float)[..., None] * np.linspace(0.05, 1, 20)
    vals = np.stack([cm(rs[..., i]) for i in range(rs.shape[-1])], -1)
    return vals.max(-1)


def pseudodistance(spec: DomainSpec, zeta, z, c0: float = C0, eps0: float | None = None,
                   rtol: float = 1e-3, return_info: bool = False, grid: int = 24):
    """d(zeta, z) = inf{eps : z in P_eps(zeta)} by bisection on eps (A = 1).

    For n <= 2 the frame does not depend on eps and the infimum is obtained
    by inverting tau coordinatewise (exact, no bisection needed). If z is not
    in P_eps0 the value is capped at eps0 and flagged.
    """
    eps0 = EPS0 if eps0 is None else eps0
    zeta = np.asarray(zeta, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if np.linalg.norm(z - zeta) < 1e-15:
        return (0.0, False) if return_info else 0.0
    if spec.n <= 2:
        fr = extremal_basis(spec, zeta, eps0, check_collar=False, eps0=eps0)
        lam = np.abs(fr.coords(z))
        d = float(max(_line_max_inverse(spec, zeta, fr.vectors[k], lam[k] / c0)
                      for k in range(spec.n)))
        capped = d > eps0
        d = min(d, eps0)
    else:
        def member(e):
            fr = extremal_basis(spec, zeta, e, grid=grid, check_collar=False, eps0=eps0)
            return bool(Polydisc(fr, 1.0, c0).contains(z))

        capped = not member(eps0)
        if capped:
            d = eps0
        else:
            lo, hi = 1e-14, eps0
            while hi / lo - 1 > rtol:
                mid = np.sqrt(lo * hi)
                if member(mid):
                    hi = mid
                else:
                    lo = mid
            d = hi
    return (d, capped) if return_info else d


# ---------------------------------------------------------------- properties

TWO_SIDED = ("P2", "P3")


@dataclass
class GeometryReport:
    domain: str
    constants: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    def record(self, pid, zeta, eps, direction, tau_val, const):
        self.rows.append((pid, zeta, eps, direction, tau_val, const))
        lo, hi = self.constants.get(pid, (np.inf, -np.inf))
        self.constants[pid] = (min(lo, const), max(hi, const))

    def worst(self, pid) -> float:
        """Worst constant: max(hi, 1/lo) for equivalences, hi for one-sided bounds."""
        lo, hi = self.constants[pid]
        return float(max(hi, 1 / lo)) if pid in TWO_SIDED else float(hi)

    def summary(self) -> dict:
        return {pid: self.worst(pid) for pid in sorted(self.constants)}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["zeta", "eps", "direction", "tau", "property-id", "measured-constant"])
            for pid, zeta, eps, d, t, c in self.rows:
                w.writerow([_fmt(zeta), repr(float(eps)), _fmt(d), repr(float(t)), pid, repr(float(c))])


def _fmt(v):
    v = np.atleast_1d(np.asarray(v, dtype=complex))
    return " ".join(f"{x.real:.12g}{x.imag:+.12g}j" for x in v)


def _collar_point(spec, rng, eta):
    """A boundary point pushed inward by a random depth in [0, eta]."""
    b = sample_boundary(spec, 1, rng)[0]
    nu = complex_normal(spec, b)
    return b - rng.uniform(0, eta) * nu


def exponent_fit(spec: DomainSpec, zeta, eps, lams=(2, 4, 8, 16, 32, 64), grid: int = 32):
    """Fitted exponents of tau_j(lam eps)/tau_j(eps) against lam, per frame index j >= 2.

    The frame is fixed at scale eps so that the same directions are followed.
    """
    fr = extremal_basis(spec, zeta, eps, grid=grid, check_collar=False)
    lams = np.asarray(lams, float)
    t0 = fr.radii
    ratios = np.array([tau_many(spec, zeta, fr.vectors, eps * l, eps0=np.inf) / t0 for l in lams])
    x = np.log(lams)
    slopes = [np.polyfit(x, np.log(ratios[:, j]), 1)[0] for j in range(spec.n)]
    return np.array(slopes), ratios


def verify_geometry_properties(spec: DomainSpec, n_samples: int = 20, seed: int = 0,
                               eps_range=(1e-4, 1e-2), grid: int = 32) -> GeometryReport:
    """Measured constants for the structural properties of the tau geometry.

    Property ids: P1 (derivative bounds in the extremal frame), P2 (normal
    Taylor sum vs eps), P3 (mixed direction harmonic sum), P4a/P4b (lines vs
    polydiscs), P5lo/P5hi (scaling exponents), ENG (engulfing P_eps in
    P_{alpha eps}).
    """
    rng = np.random.default_rng(seed)
    rep = GeometryReport(spec.name)
    n = spec.n
    for _ in range(n_samples):
        zeta = sample_boundary(spec, 1, rng)[0]
        eps = float(np.exp(rng.uniform(*np.log(eps_range))))
        fr = extremal_basis(spec, zeta, eps, grid=grid, check_collar=False)
        V, t = fr.vectors, fr.radii

        # (1): |d^{a+b} rho / dw^a dwbar^b| prod tau^{a+b} <= C eps in frame coordinates
        q = compose_affine(spec.rho, zeta, V.T)
        worst = 0.0
        for (a, b), c in q.terms.items():
            if sum(a) + sum(b) == 0:
                continue
            fac = _mf(a) * _mf(b)
            worst = max(worst, abs(c) * fac * np.prod(t ** (np.array(a) + np.array(b))) / eps)
        rep.record("P1", zeta, eps, V[0], t[0], worst)

        # (2): sum_{a+b>=1} |a^nu_ab| tau^{a+b} ~ eps for a random unit direction
        u = rng.normal(size=n) + 1j * rng.normal(size=n)
        u /= np.linalg.norm(u)
        for v in (u, V[-1]):
            tv = tau_many(spec, zeta, v, eps)[0]
            C = spec.rho.line_coeffs(zeta, v)
            # Taylor coefficients of the restriction to the line
            s = sum(abs(C[a, b]) * tv ** (a + b)
                    for a in range(C.shape[0]) for b in range(C.shape[1]) if a + b >= 1)
            rep.record("P2", zeta, eps, v, tv, s / eps)

        # (3): 1/tau(gamma) ~ sum |a_j| / tau_j
        tg = tau_many(spec, zeta, u, eps)[0]
        a = fr.coords(zeta + u)
        rep.record("P3", zeta, eps, u, tg, (1 / tg) / np.sum(np.abs(a) / t))

        # (4a): z in P_eps(zeta), z = zeta + lam v  =>  |lam| <~ tau(zeta, v, eps)
        w = (rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)) * C0 * t / np.sqrt(2)
        dz = w @ V
        lam = np.linalg.norm(dz)
        rep.record("P4a", zeta, eps, dz / lam, tau_many(spec, zeta, dz / lam, eps)[0],
                   lam / tau_many(spec, zeta, dz / lam, eps)[0])
        # (4b): |lam| <= tau(zeta, v, eps)  =>  z in C P_eps(zeta)
        tv = tau_many(spec, zeta, u, eps)[0]
        rep.record("P4b", zeta, eps, u, tv, float(Polydisc(fr).ratio(zeta + tv * u)))

        # (5): tau_j(lam eps) / tau_j(eps) between lam^{1/2m} and lam^{1/2}
        for lamf in (4.0, 16.0):
            tl = tau_many(spec, zeta, V, eps * lamf, eps0=np.inf)
            for j in range(1, n):
                r = tl[j] / t[j]
                rep.record("P5lo", zeta, eps, V[j], t[j], lamf ** (1 / spec.type_bound) / r)
                rep.record("P5hi", zeta, eps, V[j], t[j], r / lamf ** 0.5)

        # engulfing: P_eps(zeta) in C P_{2 eps}(zeta) and P_{2 eps} in C P_eps
        fr2 = extremal_basis(spec, zeta, min(2 * eps, EPS0), grid=grid, check_collar=False)
        corners = _box_corners(fr, rng, 64)
        rep.record("ENG", zeta, eps, V[0], t[0], float(Polydisc(fr2).ratio(corners).max()))
        corners2 = _box_corners(fr2, rng, 64)
        rep.record("ENG", zeta, eps, V[0], t[0], float(Polydisc(fr).ratio(corners2).max()))
    return rep


def _mf(a):
    out = 1
    for x in a:
        for k in range(2, int(x) + 1):
            out *= k
    return out


def _box_corners(fr: ExtremalFrame, rng, count):
    """Random points on the distinguished boundary of P_eps (|lam_k| = c0 tau_k)."""
    n = len(fr.radii)
    ph = np.exp(2j * np.pi * rng.uniform(size=(count, n)))
    return fr.zeta + (ph * C0 * fr.radii) @ fr.vectors


def quasi_symmetry(spec: DomainSpec, count: int = 1000, seed: int = 0, eps_range=(1e-4, 1e-2)) -> dict:
    """max over random collar pairs of max(d(z, zeta)/d(zeta, z), d(zeta, z)/d(z, zeta)).

    zeta is a collar point at depth <= eps; z is drawn in P_eps(zeta) cap closure(Omega).
    """
    rng = np.random.default_rng(seed)
    ratios, rows = [], []
    while len(ratios) < count:
        eps = float(np.exp(rng.uniform(*np.log(eps_range))))
        b = sample_boundary(spec, 1, rng)[0]
        zeta = b - rng.uniform(0, eps) * complex_normal(spec, b)
        fr = extremal_basis(spec, zeta, eps, check_collar=False)
        lam = np.exp(2j * np.pi * rng.uniform(size=spec.n)) * np.sqrt(rng.uniform(size=spec.n)) * C0 * fr.radii
        z = zeta + lam @ fr.vectors
        if spec(z) > 0:
            continue
        a = pseudodistance(spec, zeta, z)
        c = pseudodistance(spec, z, zeta)
        if a <= 0 or c <= 0:
            continue
        r = max(a / c, c / a)
        ratios.append(r)
        rows.append({"zeta": _fmt(zeta), "z": _fmt(z), "eps": eps, "d_zeta_z": a, "d_z_zeta": c, "ratio": r})
    return {"max_ratio": float(max(ratios)), "median_ratio": float(np.median(ratios)), "rows": rows}
