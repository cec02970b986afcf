"""Polar quadrature on star-shaped model domains in C^2 (real dimension 4)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .domains import DomainSpec


@dataclass
class Grid:
    points: np.ndarray  # (N, n) complex
    weights: np.ndarray  # (N,)
    normals: np.ndarray | None = None  # unit outward normals (complex form) for boundary grids

    def __len__(self):
        return len(self.weights)

    def integrate(self, values) -> complex:
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))


def gauss(a, b, k):
    x, w = leggauss(k)
    a, b = np.asarray(a, float), np.asarray(b, float)
    mid, half = (a + b) / 2, (b - a) / 2
    return mid[..., None] + half[..., None] * x, half[..., None] * w


def sphere_dirs(n_alpha: int, n_phi: int, torus: bool = False):
    """Directions u = (cos a e^{i p1}, sin a e^{i p2}) on S^3 with weights of dS.

    With ``torus`` the phases are collapsed to 0 and the weight carries (2 pi)^2;
    valid for integrands invariant under (z1, z2) -> (e^{i t1} z1, e^{i t2} z2).
    """
    a, wa = gauss(0.0, np.pi / 2, n_alpha)
    wa = wa * np.cos(a) * np.sin(a)
    if torus:
        p = np.zeros(1)
        wp = np.array([2 * np.pi])
    else:
        p = np.arange(n_phi) * 2 * np.pi / n_phi
        wp = np.full(n_phi, 2 * np.pi / n_phi)
    A, P1, P2 = np.meshgrid(a, p, p, indexing="ij")
    W = wa[:, None, None] * wp[None, :, None] * wp[None, None, :]
    u = np.stack([np.cos(A) * np.exp(1j * P1), np.sin(A) * np.exp(1j * P2)], -1)
    return u.reshape(-1, 2), W.ravel()


def ray_exit(spec: DomainSpec, center, U, iters: int = 70) -> np.ndarray:
    """First r > 0 with rho(center + r u) = 0, for each row u of U (center inside)."""
    C = spec.rho.line_coeffs(center, U)  # rho(c + lam u) = sum C_ab lam^a conj(lam)^b
    d = C.shape[-1] - 1
    # restricted to real lam = r this is a real polynomial in r
    coef = np.zeros(C.shape[:-2] + (2 * d + 1,))
    for a in range(d + 1):
        for b in range(d + 1):
            coef[..., a + b] += C[..., a, b].real

    def p(r):
        return (coef * r[..., None] ** np.arange(2 * d + 1)).sum(-1)

    lo = np.zeros(len(U))
    hi = np.full(len(U), 1e-3)
    for _ in range(60):
        out = p(hi) < 0
        if not out.any():
            break
        lo = np.where(out, hi, lo)
        hi = np.where(out, 2 * hi, hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = p(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def radial_nodes(rmax, n_r: int, n_out: int, n_in: int = 0):
    """Gauss panels on [0, rmax] graded geometrically toward rmax (and toward 0 if n_in).

    Returns r (D, K) and dr weights (D, K).
    """
    brk = [0.0]
    brk += [2.0 ** -k for k in range(n_in, 0, -1)]
    brk += [1 - 2.0 ** -k for k in range(1, n_out + 1)] + [1.0]
    brk = np.unique(np.array(brk))
    rs, ws = [], []
    for a, b in zip(brk[:-1], brk[1:]):
        r, w = gauss(a * rmax, b * rmax, n_r)
        rs.append(r)
        ws.append(w)
    return np.concatenate(rs, -1), np.concatenate(ws, -1)


LEVELS = {0: (6, 12, 6, 10), 1: (10, 20, 8, 12), 2: (16, 32, 10, 14), 3: (24, 48, 12, 16)}


# per level: Gauss nodes per graded panel, polar nodes and azimuth nodes on S^2
NORMAL_LEVELS = {0: (3, 5, 10), 1: (4, 7, 14), 2: (5, 10, 20), 3: (6, 14, 28)}


def graded_panels(a: float, b: float, grade: int, k: int, toward: str = "a"):
    """Gauss nodes on [a, b] in panels shrinking geometrically (factor 2) toward one end."""
    t = np.unique([0.0] + [2.0 ** -j for j in range(grade, -1, -1)])
    if toward == "b":
        t = np.unique(1 - t)
    x, w = gauss(a + (b - a) * t[:-1], a + (b - a) * t[1:], k)
    return x.ravel(), w.ravel()


def normal_dirs(N, grade: int, level: int = 0):
    """Unit directions in R^4 (as C^2 vectors) with weights of dS^3, graded toward the
    hyperplane orthogonal to the real unit vector N.

    u = sin(b) N + cos(b) w, w on the unit sphere of N-perp; dS^3 = cos(b)^2 db dS^2(w).
    """
    k, nth, nps = NORMAL_LEVELS[level]
    bp, wp = graded_panels(0.0, np.pi / 2, grade, k, toward="a")
    b = np.concatenate([-bp[::-1], bp])
    wb = np.concatenate([wp[::-1], wp]) * np.cos(b) ** 2
    # sphere S^2 in N-perp: polar angle by Gauss, azimuth uniform
    th, wt = gauss(0.0, np.pi, nth)
    wt = wt * np.sin(th)
    ps = np.arange(nps) * 2 * np.pi / nps
    wps = np.full(nps, 2 * np.pi / nps)
    Nr = np.r_[np.real(N), np.imag(N)]
    Nr = Nr / np.linalg.norm(Nr)
    Qm, _ = np.linalg.qr(np.column_stack([Nr, np.eye(4)]))
    E = Qm[:, 1:4] * np.sign(Qm[:, :1].T @ Nr)[0]
    Wd = np.stack([np.cos(th)[:, None] * np.ones_like(ps), np.sin(th)[:, None] * np.cos(ps),
                   np.sin(th)[:, None] * np.sin(ps)], -1).reshape(-1, 3)
    ww = (wt[:, None] * wps).ravel()
    Wr = Wd @ E.T  # (M, 4) real
    U = np.sin(b)[:, None, None] * Nr + np.cos(b)[:, None, None] * Wr[None]
    W = wb[:, None] * ww[None]
    U = U.reshape(-1, 4)
    return U[:, :2] + 1j * U[:, 2:], W.ravel()


def domain_grid(spec: DomainSpec, level: int = 0, center=None, torus: bool = False,
                n_in: int = 0) -> Grid:
    """Volume grid of {rho < 0} in polar coordinates about ``center``.

    dV = r^3 dr dS; radial panels graded toward the boundary (and toward the
    center if ``n_in`` > 0, for integrands singular there).
    """
    if spec.n != 2:
        raise NotImplementedError("volume quadrature is implemented for n = 2")
    na, nphi, nr, nout = LEVELS[level]
    center = np.zeros(2, complex) if center is None else np.asarray(center, complex)
    U, wS = sphere_dirs(na, nphi, torus)
    rmax = ray_exit(spec, center, U)
    r, wr = radial_nodes(rmax, nr, nout, n_in)
    pts = center + r[..., None] * U[:, None, :]
    w = wS[:, None] * wr * r ** 3
    return Grid(pts.reshape(-1, 2), w.ravel())


def boundary_grid(spec: DomainSpec, level: int = 0, offset: float = 0.0, torus: bool = False) -> Grid:
    """Surface grid of {rho = 0} as a radial graph over S^3 (center 0).

    dsigma = R^3 / (N . u) dS with N the unit outward normal. With ``offset``
    the nodes move to b - offset N (weights kept from the boundary).
    """
    if spec.n != 2:
        raise NotImplementedError("boundary quadrature is implemented for n = 2")
    na, nphi, _, _ = LEVELS[level]
    U, wS = sphere_dirs(2 * na, 2 * nphi, torus)
    R = ray_exit(spec, np.zeros(2), U)
    b = R[:, None] * U
    g = spec.dbar(b)
    N = g / np.linalg.norm(g, axis=-1, keepdims=True)  # real unit normal as complex vector
    cos = (N * np.conj(U)).sum(-1).real
    w = wS * R ** 3 / cos
    return Grid(b - offset * N, w, normals=N)


@dataclass
class QuadratureSpec:
    spec: DomainSpec
    level: int = 0
    r_min: float = 1e-3

    def volume(self, **kw) -> Grid:
        return domain_grid(self.spec, self.level, **kw)

    def boundary(self, **kw) -> Grid:
        return boundary_grid(self.spec, self.level, **kw)

    near: float = 0.05

    def centered(self, z, **kw) -> Grid:
        """Grid about an interior point z, graded toward z (diagonal refinement).

        Within ``near`` of the boundary the directions are graded toward the
        tangent hyperplane, where the weight has a layer of angular width ~ delta.
        """
        n_in = kw.pop("n_in", 8)
        z = np.asarray(z, complex)
        if self.spec.n == 2 and not kw:
            from .domains import distance_field
            d, dd = distance_field(self.spec, z[None])
            if d[0] < self.near:
                grade = int(np.ceil(np.log2(self.near / d[0]))) + 4
                return graded_grid(self.spec, self.level, z, dd[0], grade, n_in)
        return domain_grid(self.spec, self.level, center=z, n_in=n_in, **kw)


def graded_grid(spec: DomainSpec, level: int, center, normal, grade: int, n_in: int = 8) -> Grid:
    """Polar grid about ``center`` with directions graded toward the plane orthogonal to ``normal``."""
    _, _, nr, nout = LEVELS[level]
    U, wS = normal_dirs(normal, grade, level)
    rmax = ray_exit(spec, center, U)
    r, wr = radial_nodes(rmax, nr, nout, n_in)
    pts = center + r[..., None] * U[:, None, :]
    w = wS[:, None] * wr * r ** 3
    return Grid(pts.reshape(-1, 2), w.ravel())


def reinhardt_grid(spec: DomainSpec, level: int = 0, alpha_grade: int = 0, n_in: int = 0) -> Grid:
    """Torus-reduced volume grid for Reinhardt domains: nodes at real (r cos a, r sin a).

    Integrands must be invariant under the torus action. With ``alpha_grade`` the
    angle panels are refined geometrically toward a = 0 (the plane z2 = 0).
    """
    if spec.n != 2:
        raise NotImplementedError("torus reduction is implemented for n = 2")
    if not spec.reinhardt:
        raise ValueError(f"{spec.name} is not a Reinhardt domain")
    na, _, nr, nout = LEVELS[level]
    top = np.pi / 2
    brk = np.unique([0.0] + [top * 2.0 ** -k for k in range(alpha_grade, -1, -1)])
    a, wa = gauss(brk[:-1], brk[1:], na)
    a, wa = a.ravel(), wa.ravel()
    U = np.stack([np.cos(a), np.sin(a)], -1).astype(complex)
    wS = wa * np.cos(a) * np.sin(a) * (2 * np.pi) ** 2
    rmax = ray_exit(spec, np.zeros(2, complex), U)
    r, wr = radial_nodes(rmax, nr, nout, n_in)
    pts = r[..., None] * U[:, None, :]
    w = wS[:, None] * wr * r ** 3
    return Grid(pts.reshape(-1, 2), w.ravel())
