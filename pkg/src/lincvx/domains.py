"""Polynomial model domains: defining functions, boundary distance, lineal convexity."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .poly import Poly


class OutOfCollar(ValueError):
    """Raised when a point is outside the region where the foot-point iteration is valid."""


@dataclass(eq=False)
class DomainSpec:
    name: str
    n: int
    coeffs: dict
    type_bound: int
    eta0: float
    box: float = 1.5
    rho: Poly = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.n <= 3:
            raise ValueError("n must be 1, 2 or 3")
        if self.type_bound % 2:
            raise ValueError("type bound 2m must be even")
        self.rho = Poly(self.n, self.coeffs)
        if not self.rho.is_hermitian(tol=1e-14):
            raise ValueError(f"{self.name}: coefficients are not Hermitian symmetric")

    @property
    def m(self) -> int:
        return self.type_bound // 2

    @property
    def degree(self) -> int:
        return self.rho.degree

    @property
    def reinhardt(self) -> bool:
        """True if rho depends only on |z_1|,...,|z_n| (every monomial has alpha == beta)."""
        return all(a == b for a, b in self.rho.terms)

    def deriv(self, alpha, beta) -> Poly:
        key = (tuple(alpha), tuple(beta))
        if key not in self._cache:
            self._cache[key] = self.rho.deriv(alpha, beta)
        return self._cache[key]

    def __call__(self, z) -> np.ndarray:
        """rho(z) as a real array."""
        return self.rho(z).real

    def dbar(self, z) -> np.ndarray:
        """(d rho / d zbar_1, ..., d rho / d zbar_n) with shape z.shape."""
        z = np.asarray(z, dtype=complex)
        e = np.eye(self.n, dtype=int)
        zero = (0,) * self.n
        return np.stack([self.deriv(zero, e[i])(z) for i in range(self.n)], axis=-1)

    def real_grad(self, z) -> np.ndarray:
        """Gradient in real coordinates (x_1, y_1, ..., x_n, y_n)."""
        g = self.dbar(z)  # d/dzbar; d/dx = 2 Re(d/dz) = 2 Re(conj(d/dzbar))
        out = np.empty(g.shape[:-1] + (2 * self.n,))
        out[..., 0::2] = 2 * g.real
        out[..., 1::2] = 2 * g.imag
        return out

    def real_hessian(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        n = self.n
        e = np.eye(n, dtype=int)
        H = np.empty(z.shape[:-1] + (2 * n, 2 * n))
        for i in range(n):
            for j in range(n):
                hij = self.deriv(e[i] + e[j], (0,) * n)(z)  # rho_{ij}
                hijb = self.deriv(e[i], e[j])(z)  # rho_{i jbar}
                H[..., 2 * i, 2 * j] = 2 * (hij.real + hijb.real)
                H[..., 2 * i, 2 * j + 1] = -2 * hij.imag + 2 * hijb.imag
                H[..., 2 * i + 1, 2 * j] = -2 * hij.imag - 2 * hijb.imag
                H[..., 2 * i + 1, 2 * j + 1] = -2 * hij.real + 2 * hijb.real
        return H

    def lipschitz(self) -> float:
        """Crude upper bound of |grad rho| on the sample box (seeded sampling, 50% margin)."""
        if "lip" not in self._cache:
            pts = random_box_points(self, 4096, np.random.default_rng(0))
            self._cache["lip"] = 1.5 * float(np.linalg.norm(self.real_grad(pts), axis=-1).max())
        return self._cache["lip"]


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def to_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def random_box_points(spec: DomainSpec, count: int, rng) -> np.ndarray:
    x = rng.uniform(-spec.box, spec.box, size=(count, 2 * spec.n))
    return to_complex(x)


def eval_rho(spec: DomainSpec, z, alpha=None, beta=None):
    """Exact mixed Wirtinger derivative d^alpha d-bar^beta rho at z."""
    z = np.asarray(z, dtype=complex)
    if z.shape[-1] != spec.n:
        raise ValueError(f"point has dimension {z.shape[-1]}, domain {spec.name} has n={spec.n}")
    zero = (0,) * spec.n
    alpha = zero if alpha is None else tuple(alpha)
    beta = zero if beta is None else tuple(beta)
    if sum(alpha) + sum(beta) > spec.degree:
        raise ValueError("derivative order exceeds the degree of rho")
    return spec.deriv(alpha, beta)(z)


# ---------------------------------------------------------------------------
# catalog


def _mono(n, a, b, c=1.0):
    return (tuple(a), tuple(b)), c


def _spec(name, n, terms, type_bound, eta0, box):
    coeffs = {}
    for (k, c) in terms:
        coeffs[k] = coeffs.get(k, 0) + c
    return DomainSpec(name, n, coeffs, type_bound, eta0, box)


def catalog(name: str) -> DomainSpec:
    name = name.upper()
    if name == "BALL2":
        return _spec(name, 2, [_mono(2, (1, 0), (1, 0)), _mono(2, (0, 1), (0, 1)),
                               _mono(2, (0, 0), (0, 0), -1.0)], 2, 0.4, 1.5)
    if name == "EGG24":
        return _spec(name, 2, [_mono(2, (1, 0), (1, 0)), _mono(2, (0, 2), (0, 2)),
                               _mono(2, (0, 0), (0, 0), -1.0)], 4, 0.3, 1.5)
    if name == "EGG226":
        return _spec(name, 3, [_mono(3, (1, 0, 0), (1, 0, 0)), _mono(3, (0, 1, 0), (0, 1, 0)),
                               _mono(3, (0, 0, 3), (0, 0, 3)), _mono(3, (0, 0, 0), (0, 0, 0), -1.0)],
                     6, 0.3, 1.5)
    if name == "TUBE4":
        # 2 Re z1 + (Re z2)^4; (Re z2)^4 = sum_k C(4,k) z2^k zbar2^(4-k) / 16
        terms = [_mono(2, (1, 0), (0, 0)), _mono(2, (0, 0), (1, 0))]
        for k, c in zip(range(5), (1, 4, 6, 4, 1)):
            terms.append(_mono(2, (0, k), (0, 4 - k), c / 16))
        return _spec(name, 2, terms, 4, 0.5, 1.0)
    if name == "NONCONVEX_TEST":
        return _spec(name, 2, [_mono(2, (1, 0), (1, 0)), _mono(2, (0, 1), (0, 1), -1.0),
                               _mono(2, (1, 0), (0, 0), 0.5), _mono(2, (0, 0), (1, 0), 0.5)],
                     2, 0.3, 1.0)
    raise KeyError(f"unknown domain {name!r}")


CATALOG = ("BALL2", "EGG24", "EGG226", "TUBE4", "NONCONVEX_TEST")


# ---------------------------------------------------------------------------
# spec file io


def dump_spec(spec: DomainSpec) -> str:
    lines = [f"name={spec.name}", f"n={spec.n}", f"type={spec.type_bound}",
             f"eta0={spec.eta0!r}", f"box={spec.box!r}"]
    for (a, b), c in sorted(spec.coeffs.items()):
        c = complex(c)
        lines.append(f"{' '.join(map(str, a))} | {' '.join(map(str, b))} | {c.real!r} {c.imag!r}")
    return "\n".join(lines) + "\n"


def parse_spec(text: str) -> DomainSpec:
    header, coeffs = {}, {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and "|" not in line:
            k, v = line.split("=", 1)
            header[k.strip()] = v.strip()
            continue
        parts = [p.split() for p in line.split("|")]
        if len(parts) != 3 or len(parts[2]) != 2:
            raise ValueError(f"malformed monomial line: {raw!r}")
        a, b = tuple(map(int, parts[0])), tuple(map(int, parts[1]))
        coeffs[(a, b)] = complex(float(parts[2][0]), float(parts[2][1]))
    for key in ("n", "type", "eta0"):
        if key not in header:
            raise ValueError(f"missing header {key}=")
    return DomainSpec(header.get("name", "custom"), int(header["n"]), coeffs,
                      int(header["type"]), float(header["eta0"]), float(header.get("box", 1.5)))


def load_spec(path) -> DomainSpec:
    return parse_spec(Path(path).read_text())


def get_domain(name_or_path: str) -> DomainSpec:
    try:
        return catalog(name_or_path)
    except KeyError:
        p = Path(name_or_path)
        if p.is_file():
            return load_spec(p)
        raise


# ---------------------------------------------------------------------------
# boundary geometry


@dataclass
class BoundaryPointData:
    z: np.ndarray
    delta: float
    foot: np.ndarray
    real_normal: np.ndarray
    complex_normal: np.ndarray
    tangent_frame: np.ndarray


def complex_normal(spec: DomainSpec, z) -> np.ndarray:
    g = spec.dbar(z)
    nrm = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(nrm < 1e-12):
        raise OutOfCollar("degenerate gradient of rho")
    return g / nrm


def tangent_frame(nu) -> np.ndarray:
    """Orthonormal (n-1) vectors spanning nu^perp; Gram-Schmidt on e_1..e_n, deterministic."""
    nu = np.asarray(nu, dtype=complex)
    n = nu.shape[-1]
    basis = [nu]
    for k in np.argsort(np.abs(nu), kind="stable"):
        if len(basis) == n:
            break
        e = np.zeros(n, dtype=complex)
        e[k] = 1
        for b in basis:
            e = e - np.vdot(b, e) * b
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            basis.append(e / nrm)
    return np.array(basis[1:])


def foot_points(spec: DomainSpec, z, iters: int = 40, tol: float = 1e-13):
    """Vectorized closest points on {rho = 0}. Returns (delta, foot, ok)."""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    x = to_real(z)
    N, d = x.shape
    w = x.copy()
    for _ in range(6):
        g = spec.real_grad(to_complex(w))
        gg = np.maximum((g * g).sum(-1), 1e-300)
        w = w - (spec(to_complex(w)) / gg)[:, None] * g
    g = spec.real_grad(to_complex(w))
    lam = ((x - w) * g).sum(-1) / np.maximum((g * g).sum(-1), 1e-300)
    ok = np.ones(N, dtype=bool)
    for _ in range(iters):
        wc = to_complex(w)
        g = spec.real_grad(wc)
        H = spec.real_hessian(wc)
        F = np.concatenate([w - x + lam[:, None] * g, spec(wc)[:, None]], axis=1)
        if np.all(np.abs(F).max(1) < tol):
            break
        J = np.zeros((N, d + 1, d + 1))
        J[:, :d, :d] = np.eye(d) + lam[:, None, None] * H
        J[:, :d, d] = g
        J[:, d, :d] = g
        try:
            step = np.linalg.solve(J, F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            ok[:] = False
            break
        w = w - step[:, :d]
        lam = lam - step[:, d]
    wc = to_complex(w)
    res = np.abs(spec(wc)) + np.linalg.norm(w - x + lam[:, None] * spec.real_grad(wc), axis=1)
    ok &= np.isfinite(res) & (res < 1e-9)
    delta = np.linalg.norm(x - w, axis=1)
    return delta, wc, ok


def boundary_distance(spec: DomainSpec, z) -> BoundaryPointData:
    z = np.asarray(z, dtype=complex)
    if z.shape != (spec.n,):
        raise ValueError("boundary_distance expects a single point of dimension n")
    r = float(spec(z))
    if r > spec.eta0:
        raise OutOfCollar(f"rho(z) = {r:.3g} outside the collar")
    delta, foot, ok = foot_points(spec, z[None])
    if not ok[0]:
        raise OutOfCollar("foot-point iteration did not converge")
    nu = complex_normal(spec, foot[0])
    return BoundaryPointData(z=z, delta=float(delta[0]), foot=foot[0], real_normal=nu,
                             complex_normal=nu, tangent_frame=tangent_frame(nu))


def distance_field(spec: DomainSpec, z, cap: float | None = None):
    """delta and grad(delta) (as d delta / d zbar) at many interior points.

    Points whose Lipschitz lower bound already exceeds ``cap`` get delta = cap
    (exact value not needed, e.g. for cutoffs) and zero gradient.
    """
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    N = z.shape[0]
    delta = np.empty(N)
    ddbar = np.zeros((N, spec.n), dtype=complex)
    far = np.zeros(N, dtype=bool)
    if cap is not None:
        far = -spec(z) / spec.lipschitz() >= cap
    idx = np.flatnonzero(~far)
    delta[far] = cap if cap is not None else np.nan
    if idx.size:
        d, foot, ok = foot_points(spec, z[idx])
        if not np.all(ok):
            if cap is None:
                raise OutOfCollar("foot-point iteration failed for some points")
            bad = idx[~ok]
            delta[bad] = cap
            idx, d, foot = idx[ok], d[ok], foot[ok]
        delta[idx] = d
        # grad delta = (z - foot)/delta (real); d/dzbar = 1/2 (dx + i dy)
        u = (z[idx] - foot) / np.maximum(d, 1e-300)[:, None]
        ddbar[idx] = 0.5 * u
    return delta, ddbar


def sample_boundary(spec: DomainSpec, count: int, rng, center=None) -> np.ndarray:
    """Points on {rho = 0} inside the box, by gradient projection from random starts."""
    out = []
    while sum(len(o) for o in out) < count:
        z = random_box_points(spec, 4 * count, rng)
        if center is not None:
            z = 0.5 * z + center
        x = to_real(z)
        for _ in range(60):
            g = spec.real_grad(to_complex(x))
            gg = np.maximum((g * g).sum(-1), 1e-300)
            x = x - (spec(to_complex(x)) / gg)[:, None] * g
        zc = to_complex(x)
        good = (np.abs(spec(zc)) < 1e-12) & np.all(np.abs(x) <= spec.box, axis=1)
        good &= np.linalg.norm(spec.dbar(zc), axis=1) > 1e-6
        out.append(zc[good])
    return np.concatenate(out)[:count]


def check_lineal_convexity(spec: DomainSpec, n_boundary: int = 200, n_tangent: int = 500,
                           seed: int = 0, level: float = 0.0) -> dict:
    """Count tangent-plane samples that dip into {rho < level}.

    For ``level != 0`` the boundary samples are taken on {rho = level}.
    """
    rng = np.random.default_rng(seed)
    shifted = DomainSpec(spec.name, spec.n, {**spec.coeffs}, spec.type_bound, spec.eta0, spec.box)
    if level:
        zero = ((0,) * spec.n, (0,) * spec.n)
        shifted.coeffs[zero] = shifted.coeffs.get(zero, 0) - level
        shifted.__post_init__()
    pts = sample_boundary(shifted, n_boundary, rng)
    violations, worst = 0, 0.0
    for p in pts:
        T = tangent_frame(complex_normal(shifted, p))
        c = rng.normal(size=(n_tangent, T.shape[0])) + 1j * rng.normal(size=(n_tangent, T.shape[0]))
        c *= (spec.box * rng.uniform(0, 1, size=(n_tangent, 1))
              / np.linalg.norm(c, axis=1, keepdims=True))
        q = p + c @ T
        inside = np.all(np.abs(to_real(q)) <= spec.box, axis=1)
        vals = shifted(q[inside])
        bad = vals < -1e-10
        violations += int(bad.sum())
        if bad.any():
            worst = max(worst, float(-vals[bad].min()))
    return {"domain": spec.name, "level": level, "n_boundary": int(len(pts)),
            "n_tangent": n_tangent, "violations": violations, "worst_depth": worst}
