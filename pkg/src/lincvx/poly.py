"""Sparse polynomials in z and conj(z) with exact Wirtinger derivatives."""

from __future__ import annotations

from math import comb, factorial

import numpy as np


def _falling(k: np.ndarray, r: int) -> np.ndarray:
    out = np.ones_like(k, dtype=float)
    for s in range(r):
        out = out * (k - s)
    return out


class Poly:
    """Polynomial sum_t c_t z^A_t conj(z)^B_t on C^n.

    Terms are stored as exponent arrays ``A``, ``B`` of shape (T, n) and a
    complex coefficient vector ``c``. Duplicate monomials are merged on
    construction so equality of coefficient dicts is well defined.
    """

    def __init__(self, n: int, terms: dict | None = None):
        self.n = n
        merged: dict[tuple, complex] = {}
        for (a, b), c in (terms or {}).items():
            a, b = tuple(int(x) for x in a), tuple(int(x) for x in b)
            if len(a) != n or len(b) != n:
                raise ValueError("multi-index length does not match n")
            merged[(a, b)] = merged.get((a, b), 0) + complex(c)
        merged = {k: v for k, v in merged.items() if v != 0}
        self.terms = merged
        keys = sorted(merged)
        self.A = np.array([k[0] for k in keys], dtype=int).reshape(-1, n)
        self.B = np.array([k[1] for k in keys], dtype=int).reshape(-1, n)
        self.c = np.array([merged[k] for k in keys], dtype=complex)

    @property
    def degree(self) -> int:
        if not self.terms:
            return 0
        return int((self.A.sum(1) + self.B.sum(1)).max())

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.n:
            raise ValueError(f"point dimension {z.shape[-1]} != {self.n}")
        if not self.terms:
            return np.zeros(z.shape[:-1], dtype=complex)
        zz = z[..., None, :]
        mono = np.prod(zz ** self.A * np.conj(zz) ** self.B, axis=-1)
        return mono @ self.c

    def deriv(self, alpha, beta) -> "Poly":
        """d^{|alpha|+|beta|} / dz^alpha dzbar^beta by exponent shifting."""
        alpha = np.asarray(alpha, dtype=int)
        beta = np.asarray(beta, dtype=int)
        if not self.terms:
            return Poly(self.n)
        keep = np.all(self.A >= alpha, axis=1) & np.all(self.B >= beta, axis=1)
        fac = np.ones(len(self.c))
        for i in range(self.n):
            fac *= _falling(self.A[:, i], alpha[i]) * _falling(self.B[:, i], beta[i])
        out = {}
        for t in np.flatnonzero(keep):
            out[(tuple(self.A[t] - alpha), tuple(self.B[t] - beta))] = self.c[t] * fac[t]
        return Poly(self.n, out)

    def conj(self) -> "Poly":
        return Poly(self.n, {(b, a): np.conj(c) for (a, b), c in self.terms.items()})

    def is_hermitian(self, tol: float = 0.0) -> bool:
        for (a, b), c in self.terms.items():
            if abs(self.terms.get((b, a), 0) - np.conj(c)) > tol:
                return False
        return True

    def line_coeffs(self, zeta, v) -> np.ndarray:
        """Coefficients C[..., a, b] with p(zeta + lam v) = sum C_ab lam^a conj(lam)^b.

        ``zeta`` has shape (n,) or broadcasts against ``v`` of shape (..., n).
        """
        zeta = np.asarray(zeta, dtype=complex)
        v = np.asarray(v, dtype=complex)
        shape = np.broadcast_shapes(zeta.shape, v.shape)[:-1]
        zeta = np.broadcast_to(zeta, shape + (self.n,))
        v = np.broadcast_to(v, shape + (self.n,))
        d = max(self.degree, 0)
        out = np.zeros(shape + (d + 1, d + 1), dtype=complex)
        for t in range(len(self.c)):
            ph = np.ones(shape + (1,), dtype=complex)  # poly in lam
            pa = np.ones(shape + (1,), dtype=complex)  # poly in conj(lam)
            for i in range(self.n):
                a, b = self.A[t, i], self.B[t, i]
                if a:
                    fa = np.stack([comb(a, k) * zeta[..., i] ** (a - k) * v[..., i] ** k
                                   for k in range(a + 1)], axis=-1)
                    ph = _polymul(ph, fa)
                if b:
                    fb = np.stack([comb(b, k) * np.conj(zeta[..., i]) ** (b - k) * np.conj(v[..., i]) ** k
                                   for k in range(b + 1)], axis=-1)
                    pa = _polymul(pa, fb)
            da, db = ph.shape[-1], pa.shape[-1]
            out[..., :da, :db] += self.c[t] * ph[..., :, None] * pa[..., None, :]
        return out

    def to_dict(self) -> dict:
        return dict(self.terms)

    def __add__(self, other: "Poly") -> "Poly":
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, 0) + v
        return Poly(self.n, t)

    def __repr__(self) -> str:
        return f"Poly(n={self.n}, terms={len(self.terms)}, degree={self.degree})"


def _polymul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Batched 1-D polynomial product along the last axis."""
    m, k = p.shape[-1], q.shape[-1]
    shape = np.broadcast_shapes(p.shape[:-1], q.shape[:-1])
    out = np.zeros(shape + (m + k - 1,), dtype=complex)
    for i in range(m):
        out[..., i:i + k] += p[..., i:i + 1] * q
    return out


def multi_indices(n: int, order: int):
    """All multi-indices of length n with |alpha| == order, lexicographic."""
    if n == 1:
        yield (order,)
        return
    for first in range(order, -1, -1):
        for rest in multi_indices(n - 1, order - first):
            yield (first,) + rest


def mfact(alpha) -> int:
    out = 1
    for a in alpha:
        out *= factorial(int(a))
    return out


def compose_affine(p: Poly, zeta, V) -> Poly:
    """The polynomial w -> p(zeta + V w), expanded in (w, conj(w))."""
    zeta = np.asarray(zeta, dtype=complex)
    V = np.asarray(V, dtype=complex)
    n, k = V.shape
    # linear forms z_i = zeta_i + sum_j V_ij w_j as sparse dicts over (a, b)
    zero = (0,) * k

    def lin(i, conj):
        d = {(zero, zero): np.conj(zeta[i]) if conj else zeta[i]}
        for j in range(k):
            e = tuple(int(t == j) for t in range(k))
            d[(zero, e) if conj else (e, zero)] = np.conj(V[i, j]) if conj else V[i, j]
        return d

    def mul(x, y):
        out = {}
        for (a1, b1), c1 in x.items():
            for (a2, b2), c2 in y.items():
                key = (tuple(s + t for s, t in zip(a1, a2)), tuple(s + t for s, t in zip(b1, b2)))
                out[key] = out.get(key, 0) + c1 * c2
        return out

    lins = [lin(i, False) for i in range(n)]
    lins_c = [lin(i, True) for i in range(n)]
    total = {}
    for (a, b), c in p.terms.items():
        term = {(zero, zero): c}
        for i in range(n):
            for _ in range(a[i]):
                term = mul(term, lins[i])
            for _ in range(b[i]):
                term = mul(term, lins_c[i])
        for key, val in term.items():
            total[key] = total.get(key, 0) + val
    return Poly(k, {key: v for key, v in total.items() if abs(v) > 1e-300})
