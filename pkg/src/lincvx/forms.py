"""Exterior algebra of double forms with vectorized coefficients.

Generators, in order: dzeta_1..dzeta_n, dzetabar_1..dzetabar_n, dzbar_1..dzbar_n.
The dz_i are dropped (quotient by the ideal they generate): every kernel
component used here has holomorphic z-degree 0. A form is a dict
{bitmask: coefficient array}; coefficients broadcast over a batch of nodes.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _sign(a: int, b: int) -> int:
    """Sign of reordering (gens of a)(gens of b) into increasing order."""
    inv = 0
    bb = b
    while bb:
        low = bb & -bb
        # generators of a above this generator of b must jump over it
        inv += bin(a & ~((low << 1) - 1)).count("1")
        bb ^= low
    return -1 if inv & 1 else 1


class Alg:
    def __init__(self, n: int):
        self.n = n

    def zeta(self, i):
        return 1 << i

    def zetabar(self, i):
        return 1 << (self.n + i)

    def zbar(self, i):
        return 1 << (2 * self.n + i)

    def degrees(self, mask: int) -> tuple[int, int, int]:
        n = self.n
        full = (1 << n) - 1
        return (bin(mask & full).count("1"), bin((mask >> n) & full).count("1"),
                bin((mask >> 2 * n) & full).count("1"))

    @property
    def top_zeta(self) -> int:
        return (1 << (2 * self.n)) - 1

    def top_sign(self) -> complex:
        """dzeta_1..dzeta_n dzetabar_1..dzetabar_n = top_sign * dV."""
        n = self.n
        return (-1) ** (n * (n - 1) // 2) * (-2j) ** n


def wedge(A: dict, B: dict) -> dict:
    out: dict = {}
    for ma, ca in A.items():
        for mb, cb in B.items():
            if ma & mb:
                continue
            term = _sign(ma, mb) * (ca * cb)
            m = ma | mb
            out[m] = out[m] + term if m in out else term
    return out


def add(A: dict, B: dict, cb=1.0) -> dict:
    out = dict(A)
    for m, c in B.items():
        out[m] = out[m] + cb * c if m in out else cb * c
    return out


def scale(A: dict, c) -> dict:
    return {m: c * v for m, v in A.items()}


def power(A: dict, k: int, one=1.0) -> dict:
    out = {0: one}
    for _ in range(k):
        out = wedge(out, A)
    return out


def project(A: dict, alg: Alg, zeta_deg=None, zetabar_deg=None, zbar_deg=None) -> dict:
    out = {}
    for m, c in A.items():
        a, b, z = alg.degrees(m)
        if zeta_deg is not None and a != zeta_deg:
            continue
        if zetabar_deg is not None and b != zetabar_deg:
            continue
        if zbar_deg is not None and z != zbar_deg:
            continue
        out[m] = c
    return out


def max_abs(A: dict) -> float:
    return max((float(np.max(np.abs(c))) for c in A.values()), default=0.0)
