"""Patched support function and the weighted Cauchy-Fantappie kernels K and P."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np

from . import forms as F
from .domains import DomainSpec, distance_field, sample_boundary, complex_normal
from .geometry import C0, extremal_frames
from .support import Support, SupportParams, hefer_q


def smoothstep(x, order: int = 3):
    """C^order step: 0 for x <= 0, 1 for x >= 1, degree 2 order + 1 in between."""
    x = np.clip(np.asarray(x, float), 0.0, 1.0)
    N = order
    poly = sum(comb(N + k, k) * comb(2 * N + 1, N - k) * (-x) ** k for k in range(N + 1))
    return x ** (N + 1) * poly


def smoothstep_deriv(x, order: int = 3):
    """Derivative of smoothstep, by exact differentiation of its polynomial form."""
    x = np.asarray(x, float)
    N = order
    c = np.zeros(2 * N + 2)
    for k in range(N + 1):
        c[N + 1 + k] = comb(N + k, k) * comb(2 * N + 1, N - k) * (-1) ** k
    dc = np.polynomial.polynomial.polyder(c)
    inside = (x > 0) & (x < 1)
    return np.where(inside, np.polynomial.polynomial.polyval(np.clip(x, 0, 1), dc), 0.0)


@dataclass
class CutoffConfig:
    R: float = 0.08
    eta0: float = 0.4
    order: int = 3

    def chi_hat(self, r):
        """1 on [0, R/2], 0 on [R, inf)."""
        h = self.R / 2
        return 1 - smoothstep((np.asarray(r) - h) / h, self.order)

    def chi_hat_d(self, r):
        h = self.R / 2
        return -smoothstep_deriv((np.asarray(r) - h) / h, self.order) / h

    def chi_tilde(self, d):
        h = self.eta0 / 2
        return 1 - smoothstep((np.asarray(d) - h) / h, self.order)

    def chi_tilde_d(self, d):
        h = self.eta0 / 2
        return -smoothstep_deriv((np.asarray(d) - h) / h, self.order) / h


@dataclass
class PatchedData:
    """Everything the kernel needs at a batch of pairs (z, zeta)."""
    z: np.ndarray
    zeta: np.ndarray
    S: np.ndarray
    Q: np.ndarray  # (N, n)
    dQ_dzetabar: np.ndarray  # (N, n, n): [i, j] = dQ_i / dzetabar_j
    dQ_dzbar: np.ndarray
    rho: np.ndarray
    drho_bar: np.ndarray  # d rho / d zetabar_j
    chi: np.ndarray


@dataclass
class KernelAssembly:
    spec: DomainSpec
    params: SupportParams = field(default_factory=SupportParams)
    cutoff: CutoffConfig | None = None
    K0: float = 1.0
    q: int = 1
    Cn: float = 1.0
    Cn_prime: float = 1.0
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.cutoff is None:
            self.cutoff = CutoffConfig(R=self.params.R, eta0=self.spec.eta0)
        self.support = Support(self.spec, self.params)
        self.alg = F.Alg(self.spec.n)

    @property
    def n(self):
        return self.spec.n

    # ------------------------------------------------------------ patched S, Q
    def _q0(self, z, zeta):
        return hefer_q(self.support, z, zeta)

    def _dq0_dzetabar(self, z, zeta):
        """d Q^0_i / d zetabar_j by central differences in real zeta coordinates with Richardson."""
        n = self.n
        out = np.zeros(zeta.shape + (n,), dtype=complex)

        def central(e, h):
            return (self._q0(z, zeta + h * e) - self._q0(z, zeta - h * e)) / (2 * h)

        h = self.fd_step
        for j in range(n):
            e = np.zeros(n, complex)
            e[j] = 1
            dx = (4 * central(e, h / 2) - central(e, h)) / 3
            dy = (4 * central(1j * e, h / 2) - central(1j * e, h)) / 3
            out[..., :, j] = 0.5 * (dx + 1j * dy)
        return out

    def patched(self, z, zeta) -> PatchedData:
        z, zeta = np.broadcast_arrays(np.atleast_2d(np.asarray(z, complex)),
                                      np.atleast_2d(np.asarray(zeta, complex)))
        z, zeta = z.copy(), zeta.copy()
        N, n = zeta.shape
        D = z - zeta
        r = np.linalg.norm(D, axis=1)
        if np.any(r == 0):
            raise ValueError("kernel is singular at z = zeta")
        cut = self.cutoff
        ch = cut.chi_hat(r)
        # foot points only where the ball cutoff is on; chi_tilde is irrelevant elsewhere
        near = np.flatnonzero(ch > 0)
        delta = np.full(N, np.inf)
        ddelta = np.zeros((N, n), complex)
        if near.size:
            delta[near], ddelta[near] = distance_field(self.spec, zeta[near], cap=cut.eta0)
        ct = cut.chi_tilde(delta)
        chi = ch * ct
        QE = -np.conj(D)
        S = -(r ** 2) + 0j
        Q = QE.copy()
        eye = np.eye(n)
        dQz = -(1 - chi)[:, None, None] * eye + 0j
        dQw = (1 - chi)[:, None, None] * eye + 0j
        act = np.flatnonzero(chi > 0)
        if act.size:
            za, wa = z[act], zeta[act]
            S0 = self.support(za, wa)
            Q0 = self._q0(za, wa)
            ca = chi[act]
            S[act] = ca * S0 - (1 - ca) * r[act] ** 2
            Q[act] = ca[:, None] * Q0 + (1 - ca)[:, None] * QE[act]
            chd = cut.chi_hat_d(r[act])
            # d chi / d zbar_j and d chi / d zetabar_j
            dchi_z = (ct[act] * chd / (2 * r[act]))[:, None] * D[act]
            dchi_w = -dchi_z + (ch[act] * cut.chi_tilde_d(delta[act]))[:, None] * ddelta[act]
            diff = Q0 - QE[act]
            dQz[act] += diff[:, :, None] * dchi_z[:, None, :]
            dQw[act] += diff[:, :, None] * dchi_w[:, None, :] + ca[:, None, None] * self._dq0_dzetabar(za, wa)
        rho = self.spec(zeta)
        return PatchedData(z, zeta, S, Q, dQw, dQz, rho, self.spec.dbar(zeta), chi)

    # ------------------------------------------------------------ forms
    def _pieces(self, p: PatchedData):
        n, A = self.n, self.alg
        s = {A.zeta(i): np.conj(p.zeta[:, i] - p.z[:, i]) for i in range(n)}
        ds = {}
        for i in range(n):
            ds = F.add(ds, {A.zetabar(i) | A.zeta(i): F._sign(A.zetabar(i), A.zeta(i)) * np.ones(len(p.S))})
            ds = F.add(ds, {A.zbar(i) | A.zeta(i): -F._sign(A.zbar(i), A.zeta(i)) * np.ones(len(p.S))})
        # weight form Qhat = -(1/(K0 rho)) sum Q_i dzeta_i, so 1 + <Qhat, zeta - z> = (rho + S/K0)/rho
        Qt = {A.zeta(i): -p.Q[:, i] / self.K0 for i in range(n)}
        dQt = {}
        for i in range(n):
            for j in range(n):
                for gen, coeff in ((A.zetabar(j), p.dQ_dzetabar[:, i, j]), (A.zbar(j), p.dQ_dzbar[:, i, j])):
                    dQt = F.add(dQt, {gen | A.zeta(i): -F._sign(gen, A.zeta(i)) * coeff / self.K0})
        dbr = {A.zetabar(j): p.drho_bar[:, j] for j in range(n)}
        return s, ds, Qt, dQt, dbr

    def _rho_dQ_pow(self, p, Qt, dQt, dbr, k):
        """rho^{k+1} (dQhat)^k = rho (dQt)^k - k dbar(rho) ^ Qt ^ (dQt)^{k-1}, never dividing by rho."""
        ones = np.ones(len(p.S))
        if k == 0:
            return {0: p.rho + 0j}
        a = F.scale(F.power(dQt, k, ones), p.rho)
        b = F.wedge(F.wedge(dbr, Qt), F.power(dQt, k - 1, ones))
        return F.add(a, b, -k)

    def kernel_K(self, z, zeta, data: PatchedData | None = None, raw: bool = False) -> dict:
        """Full K = C_n sum_k (n-1)!/k! (-1)^k G^(k) s ^ (dQhat)^k ^ (ds)^{n-k-1} / |zeta - z|^{2(n-k)}.

        The weight enters as G(1 + <Qhat, zeta - z> - dbar Qhat), hence the (-1)^k;
        with G(x) = 1/x this makes every summand carry k!/x^{k+1}.
        """
        p = data or self.patched(z, zeta)
        n = self.n
        s, ds, Qt, dQt, dbr = self._pieces(p)
        denom = p.rho + p.S / self.K0
        r2 = (np.abs(p.z - p.zeta) ** 2).sum(-1)
        ones = np.ones(len(p.S))
        out = {}
        for k in range(n):
            g = factorial(k) / denom ** (k + 1)  # (-1)^k G^(k)(x), rho^{k+1} pre-cancelled
            term = F.wedge(F.wedge(s, self._rho_dQ_pow(p, Qt, dQt, dbr, k)), F.power(ds, n - k - 1, ones))
            coef = factorial(n - 1) / factorial(k) * g / r2 ** (n - k)
            out = F.add(out, F.scale(term, coef))
        return out if raw else F.scale(out, self.Cn)

    def kernel_K_terms(self, z, zeta, data: PatchedData | None = None) -> list[dict]:
        """The k-th summands of K separately (constant C_n included)."""
        p = data or self.patched(z, zeta)
        n = self.n
        s, ds, Qt, dQt, dbr = self._pieces(p)
        denom = p.rho + p.S / self.K0
        r2 = (np.abs(p.z - p.zeta) ** 2).sum(-1)
        ones = np.ones(len(p.S))
        out = []
        for k in range(n):
            g = factorial(k) / denom ** (k + 1)
            term = F.wedge(F.wedge(s, self._rho_dQ_pow(p, Qt, dQt, dbr, k)), F.power(ds, n - k - 1, ones))
            out.append(F.scale(term, self.Cn * factorial(n - 1) / factorial(k) * g / r2 ** (n - k)))
        return out

    def kernel_P(self, z, zeta, data: PatchedData | None = None, raw: bool = False) -> dict:
        """P = C'_n (-1)^n G^(n) (dQhat)^n."""
        p = data or self.patched(z, zeta)
        n = self.n
        s, ds, Qt, dQt, dbr = self._pieces(p)
        denom = p.rho + p.S / self.K0
        g = factorial(n) / denom ** (n + 1)
        out = F.scale(self._rho_dQ_pow(p, Qt, dQt, dbr, n), g)
        return out if raw else F.scale(out, self.Cn_prime)

    def component(self, form: dict, which: str, q: int | None = None) -> dict:
        """Bidegree projection. K0/K2: z (0,q), zeta (n, n-q-1); K1: z (0,q-1), zeta (n, n-q);
        P: z (0,q), zeta (n, n-q). Impossible bidegrees give {}."""
        n = self.n
        q = self.q if q is None else q
        spec = {"K0": (q, n - q - 1), "K2": (q, n - q - 1), "K1": (q - 1, n - q), "P": (q, n - q)}[which]
        zb, wb = spec
        if zb < 0 or wb < 0:
            return {}
        return F.project(form, self.alg, zeta_deg=n, zetabar_deg=wb, zbar_deg=zb)

    def reduced_K1(self, z, zeta, data: PatchedData | None = None) -> dict:
        """Single-term K1 on the holomorphic plateau:
        c rho^{n-q+1} s ^ (dbar_zeta Q)^{n-q} ^ (dbar_z s)^{q-1} / (|z-zeta|^{2q} (S/K0 + rho)^{n-q+1}),
        with c fixed so that it is the k = n - q summand of K."""
        p = data or self.patched(z, zeta)
        if np.any(p.chi < 1 - 1e-15) or np.any(np.abs(p.dQ_dzbar) > 1e-9):
            raise ValueError("reduced K1 is only valid on the holomorphic plateau")
        n, q, A = self.n, self.q, self.alg
        ones = np.ones(len(p.S))
        k = n - q
        s = {A.zeta(i): np.conj(p.zeta[:, i] - p.z[:, i]) for i in range(n)}
        dzs = {}
        for i in range(n):
            dzs = F.add(dzs, {A.zbar(i) | A.zeta(i): -F._sign(A.zbar(i), A.zeta(i)) * ones})
        # rho^2 dbar_zeta Q with Q = Qt / rho: rho dbar Qt - dbar rho ^ Qt (applied k times)
        Qt = {A.zeta(i): -p.Q[:, i] / self.K0 for i in range(n)}
        dQt = {}
        for i in range(n):
            for j in range(n):
                g = A.zetabar(j)
                dQt = F.add(dQt, {g | A.zeta(i): -F._sign(g, A.zeta(i)) * p.dQ_dzetabar[:, i, j] / self.K0})
        dbr = {A.zetabar(j): p.drho_bar[:, j] for j in range(n)}
        num = F.add(F.scale(F.power(dQt, k, ones), p.rho),
                    F.wedge(F.wedge(dbr, Qt), F.power(dQt, k - 1, ones)) if k >= 1 else {}, -k)
        c = self.Cn * factorial(n - 1)
        denom = (p.rho + p.S / self.K0) ** (k + 1) * (np.abs(p.z - p.zeta) ** 2).sum(-1) ** q
        out = F.wedge(F.wedge(s, num), F.power(dzs, q - 1, ones))
        return F.scale(out, c / denom)

    # ------------------------------------------------------------ dumps
    def dump_csv(self, path, z, zeta):
        p = self.patched(z, zeta)
        K = self.kernel_K(None, None, data=p)
        P = self.kernel_P(None, None, data=p)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "zeta", "component-id", "multi-index", "re", "im"])
            for which, form in (("K0", self.component(K, "K0")), ("K1", self.component(K, "K1")),
                                ("P", self.component(P, "P"))):
                for m, c in sorted(form.items()):
                    for idx in range(len(p.S)):
                        w.writerow([_fmt(p.z[idx]), _fmt(p.zeta[idx]), which, _mask_str(self.alg, m),
                                    repr(float(c[idx].real)), repr(float(c[idx].imag))])


def _fmt(v):
    return " ".join(f"{x.real:.12g}{x.imag:+.12g}j" for x in np.atleast_1d(v))


def _mask_str(alg, m):
    names = []
    for i in range(alg.n):
        if m & alg.zeta(i):
            names.append(f"dzeta{i + 1}")
    for i in range(alg.n):
        if m & alg.zetabar(i):
            names.append(f"dzetabar{i + 1}")
    for i in range(alg.n):
        if m & alg.zbar(i):
            names.append(f"dzbar{i + 1}")
    return "^".join(names) or "1"


# ---------------------------------------------------------------- sampling

def collar_pairs(spec: DomainSpec, count: int, rng, R: float, eta0: float):
    """Pairs (z, zeta) with zeta in Omega near the boundary and z in closure(Omega) nearby or far."""
    zb = sample_boundary(spec, max(64, count // 8), rng)
    b = zb[rng.integers(0, len(zb), count)]
    nu = complex_normal(spec, b)
    depth = np.exp(rng.uniform(np.log(1e-7), np.log(eta0), count))
    zeta = b - depth[:, None] * nu
    dz = rng.normal(size=(count, spec.n)) + 1j * rng.normal(size=(count, spec.n))
    rad = np.exp(rng.uniform(np.log(1e-6), np.log(2 * R), count))
    far = rng.uniform(size=count) < 0.2
    rad[far] = rng.uniform(0, 2 * spec.box, far.sum())
    z = zeta + dz * (rad / np.linalg.norm(dz, axis=1))[:, None]
    keep = (spec(z) <= 0) & (spec(zeta) < 0) & np.all(np.abs(z) < spec.box * 1.5, axis=1)
    return z[keep], zeta[keep]


def _exact_pairs(asm: KernelAssembly, count: int, rng):
    """collar_pairs redrawn until exactly ``count`` pairs survive the filters."""
    zs, ws, have = [], [], 0
    while have < count:
        z, w = collar_pairs(asm.spec, 2 * (count - have) + 16, rng, asm.cutoff.R, asm.cutoff.eta0)
        zs.append(z)
        ws.append(w)
        have += len(z)
    return np.concatenate(zs)[:count], np.concatenate(ws)[:count]


def calibrate_K0(asm: KernelAssembly, n_samples: int = 10_000, seed: int = 0, fresh: int = 10_000):
    """K0 = 1.5 max(2 C*, 2), C* = sup Re S(z, zeta) / (-rho(zeta)); then check on fresh pairs."""
    z, zeta = _exact_pairs(asm, n_samples, np.random.default_rng(seed))
    S = _patched_S_only(asm, z, zeta)
    Cstar = float(np.max(S.real / (-asm.spec(zeta))))
    K0 = 1.5 * max(2 * Cstar, 2.0)
    z2, zeta2 = _exact_pairs(asm, fresh, np.random.default_rng(seed + 1))
    S2 = _patched_S_only(asm, z2, zeta2)
    rho = asm.spec(zeta2)
    lhs = (rho + S2 / K0).real
    viol = lhs >= rho / 2
    worst = int(np.argmax(lhs - rho / 2))
    return K0, {"C_star": Cstar, "K0": K0, "fresh_pairs": int(len(z2)), "violations": int(viol.sum()),
                "worst_pair": [_fmt(z2[worst]), _fmt(zeta2[worst])],
                "worst_excess": float((lhs - rho / 2)[worst])}


def _patched_S_only(asm, z, zeta):
    D = z - zeta
    r = np.linalg.norm(D, axis=1)
    delta, _ = distance_field(asm.spec, zeta, cap=asm.cutoff.eta0)
    chi = asm.cutoff.chi_hat(r) * asm.cutoff.chi_tilde(delta)
    S = -(r ** 2) + 0j
    act = chi > 0
    S[act] = chi[act] * asm.support(z[act], zeta[act]) - (1 - chi[act]) * r[act] ** 2
    return S


def patched_S(asm: KernelAssembly, z, zeta):
    p = asm.patched(z, zeta)
    return p.S, p.Q


# ---------------------------------------------------------------- shell and frame checks

def _shell_samples(spec, z, eps, i, count, rng, eps0=np.inf):
    """Points of P_{2^-i eps}(z) outside P_{2^-i-1 eps}(z), inside Omega."""
    V, t_out = extremal_frames(spec, z[None], 2.0 ** -i * eps, eps0=eps0)
    _, t_in = extremal_frames(spec, z[None], 2.0 ** -(i + 1) * eps, eps0=eps0)
    V, t_out, t_in = V[0], t_out[0], t_in[0]
    n = spec.n
    ph = np.exp(2j * np.pi * rng.uniform(size=(count, n)))
    rad = np.sqrt(rng.uniform(size=(count, n)))
    lam = ph * rad * C0 * t_out
    outside = np.any(np.abs(lam) > C0 * t_in, axis=1)
    zeta = z + lam[outside] @ V
    return zeta[spec(zeta) < 0]


def verify_lemma21(asm: KernelAssembly, n_shells: int = 6, n_samples: int = 400, seed: int = 0,
                   eps_list=(2.0 ** -3, 2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7), n_points: int = 6,
                   c_min: float = 1e-2) -> dict:
    """min over shells of |rho(zeta) + S(z, zeta)/K0| / (2^-i eps), z with delta(z) <= eps."""
    spec = asm.spec
    rng = np.random.default_rng(seed)
    rows = []
    worst = np.inf
    for eps in eps_list:
        zb = sample_boundary(spec, n_points, rng)
        nu = complex_normal(spec, zb)
        zs = zb - (rng.uniform(0, 1, n_points) * eps)[:, None] * nu
        zs[0] = zb[0]  # include a boundary point
        for z in zs:
            for i in range(n_shells + 1):
                zeta = _shell_samples(spec, z, eps, i, n_samples, rng)
                if len(zeta) == 0:
                    continue
                S = _patched_S_only(asm, np.broadcast_to(z, zeta.shape), zeta)
                val = np.abs(spec(zeta) + S / asm.K0) / (2.0 ** -i * eps)
                m = float(val.min())
                worst = min(worst, m)
                rows.append({"eps": eps, "shell": i, "z": _fmt(z), "min_ratio": m, "count": int(len(zeta))})
    return {"min_ratio": worst, "c_min": c_min, "passed": bool(worst >= c_min), "rows": rows}


def verify_lemma25(asm: KernelAssembly, n_samples: int = 200, seed: int = 0, eps_list=(1e-2, 1e-3),
                   n_points: int = 5, threshold: float = 1e2) -> dict:
    """Worst constants of |d rho/d zeta_i| tau_i/eps, (|Q_i(z,zeta)| + |Q_i(zeta,z)|) tau_i/eps
    and |dQ_i/dzetabar_j| tau_i tau_j/eps in the extremal frame at (z, eps), zeta in P_eps(z)."""
    spec = asm.spec
    rng = np.random.default_rng(seed)
    n = spec.n
    c1 = c2 = c3 = 0.0
    for eps in eps_list:
        zb = sample_boundary(spec, n_points, rng)
        nu = complex_normal(spec, zb)
        zs = zb - (rng.uniform(0, 1, n_points) * eps)[:, None] * nu
        for z in zs:
            V, t = extremal_frames(spec, z[None], eps, eps0=np.inf)
            V, t = V[0], t[0]
            lam = np.exp(2j * np.pi * rng.uniform(size=(n_samples, n))) * np.sqrt(rng.uniform(size=(n_samples, n))) * C0 * t
            zeta = z + lam @ V
            zeta = zeta[(spec(zeta) < 0) & (np.linalg.norm(zeta - z, axis=1) > 0)]
            if len(zeta) == 0:
                continue
            zz = np.broadcast_to(z, zeta.shape)
            drho = np.conj(spec.dbar(zeta))  # d rho / d zeta_i (rho real)
            d1 = np.abs(drho @ V.T) * t / eps
            p1 = asm.patched(zz, zeta)
            p2 = asm.patched(zeta, zz) if np.all(spec(z) < 0) else None
            Qz = np.abs(p1.Q @ V.T)
            if p2 is not None:
                Qz = Qz + np.abs(p2.Q @ V.T)
            d2 = Qz * t / eps
            dQ = np.einsum("il,nlm,jm->nij", V, p1.dQ_dzetabar, np.conj(V))
            d3 = np.abs(dQ) * t[:, None] * t[None, :] / eps
            c1, c2, c3 = max(c1, d1.max()), max(c2, d2.max()), max(c3, d3.max())
    return {"drho": float(c1), "Q": float(c2), "dQ": float(c3), "threshold": threshold,
            "passed": bool(max(c1, c2, c3) <= threshold)}
