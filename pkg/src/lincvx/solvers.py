"""Quadrature pipelines: Koppelman identity, dbar solution, L1 boundary estimate,
Poincare d-solver, current norms and Blaschke sums."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from . import forms as F
from .domains import DomainSpec, complex_normal, distance_field, foot_points, random_box_points, sample_boundary
from .geometry import C0, extremal_frames, tau_many
from .kernels import KernelAssembly
from .norms import CurrentField, FormField, combos, current_norms, form_knorm, _insert_sign
from .poly import Poly
from .quadrature import Grid, QuadratureSpec, gauss, reinhardt_grid

DEFAULTS_PATH = Path(__file__).with_name("defaults.json")


def load_defaults() -> dict:
    return json.loads(DEFAULTS_PATH.read_text())


# ---------------------------------------------------------------- reports

@dataclass
class SolveReport:
    scenario: str
    pipeline: str
    domain: str
    passed: bool | None = None
    constants: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    deltas: dict = field(default_factory=dict)  # refinement-stability delta of each ratio
    grid_levels: list = field(default_factory=list)
    runtimes: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    series: list = field(default_factory=list)  # rows for the CSV

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("series")
        return _jsonable(d)

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        jp = out / f"{self.scenario}.report.json"
        cp = out / f"{self.scenario}.series.csv"
        tmp = jp.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        tmp.replace(jp)
        keys = []
        for row in self.series:
            keys += [k for k in row if k not in keys]
        tmp = cp.with_suffix(".tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys or ["empty"])
            w.writeheader()
            for row in self.series:
                w.writerow({k: _jsonable(v) for k, v in row.items()})
        tmp.replace(cp)
        return jp, cp


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _rel_delta(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


# ---------------------------------------------------------------- kernel integrals

def _form_dict(alg: F.Alg, f: FormField, zeta) -> dict:
    """f(zeta) as an algebra element in the dzetabar generators."""
    a = f(zeta)
    out = {}
    for k, I in enumerate(combos(f.n, f.q)):
        if I in f.coeffs:
            m = 0
            for i in I:
                m |= alg.zetabar(i)
            out[m] = a[:, k]
    return out


def _accumulate(alg: F.Alg, form: dict, w, acc: dict):
    """Add the zeta-integral of the top-degree part: {J: coefficient of dzbar^J}."""
    top = alg.top_zeta
    sgn = alg.top_sign()
    for m, c in form.items():
        if m & top != top:
            continue
        zm = m >> (2 * alg.n)
        J = tuple(i for i in range(alg.n) if zm >> i & 1)
        acc[J] = acc.get(J, 0) + sgn * np.dot(w, c)


def kernel_integrals(asm: KernelAssembly, forms: list, z, grid: Grid, terms=("K1", "K2", "P"),
                     chunk: int = 20_000) -> list[dict]:
    """Raw (constant-free) integrals int f ^ K1, int dbar f ^ K2, int f ^ P at z, for each f."""
    alg = asm.alg
    z = np.asarray(z, complex)
    out = [{t: {} for t in terms} for _ in forms]
    dforms = [f.dbar() if ("K2" in terms and f.q < f.n and f.polynomial) else None for f in forms]
    need_K = "K1" in terms or "K2" in terms
    for s in range(0, len(grid), chunk):
        pts, w = grid.points[s:s + chunk], grid.weights[s:s + chunk]
        p = asm.patched(z, pts)
        K = asm.kernel_K(None, None, data=p, raw=True) if need_K else None
        P = asm.kernel_P(None, None, data=p, raw=True) if "P" in terms else None
        for f, df, res in zip(forms, dforms, out):
            fd = _form_dict(alg, f, pts)
            if "K1" in terms:
                _accumulate(alg, F.wedge(fd, asm.component(K, "K1", f.q)), w, res["K1"])
            if "K2" in terms and df is not None:
                _accumulate(alg, F.wedge(_form_dict(alg, df, pts), asm.component(K, "K2", f.q)), w, res["K2"])
            if "P" in terms:
                _accumulate(alg, F.wedge(fd, asm.component(P, "P", f.q)), w, res["P"])
    return out


def dbar_fd(func, z, n: int, h: float = 1e-4) -> dict:
    """dbar of a form-valued map z -> {J: value} by central differences with one Richardson level."""
    z = np.asarray(z, complex)
    def central(e, hh):
        a, b = func(z + hh * e), func(z - hh * e)
        return {J: (a.get(J, 0) - b.get(J, 0)) / (2 * hh) for J in set(a) | set(b)}

    out: dict = {}
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = 1
        d = {}
        for key, vec in (("x", e), ("y", 1j * e)):
            c1, c2 = central(vec, h), central(vec, h / 2)
            d[key] = {J: (4 * c2.get(J, 0) - c1.get(J, 0)) / 3 for J in set(c1) | set(c2)}
        for J in set(d["x"]) | set(d["y"]):
            val = 0.5 * (d["x"].get(J, 0) + 1j * d["y"].get(J, 0))
            sgn, JJ = _insert_sign(j, J)
            if sgn:
                out[JJ] = out.get(JJ, 0) + sgn * val
    return out


def _vec(form: dict, n: int, q: int) -> np.ndarray:
    return np.array([form.get(I, 0) for I in combos(n, q)], dtype=complex)


def koppelman_terms(asm: KernelAssembly, forms: list, z, quad: QuadratureSpec, h: float = 1e-4) -> list[dict]:
    """Raw term vectors A (dbar of the K1 integral, K2 integral) and B (P integral) at z."""
    n = asm.n
    base = kernel_integrals(asm, forms, z, quad.centered(z), terms=("K2", "P"))

    def k1(zz):
        return kernel_integrals(asm, forms, zz, quad.centered(zz), terms=("K1",))

    cache = {}

    def k1_of(i):
        def g(zz):
            key = tuple(np.round(np.r_[zz.real, zz.imag], 14))
            if key not in cache:
                cache[key] = k1(zz)
            return cache[key][i]["K1"]
        return g

    out = []
    for i, f in enumerate(forms):
        dI1 = dbar_fd(k1_of(i), z, n, h)
        q = f.q
        out.append({"dbarK1": _vec(dI1, n, q), "K2": _vec(base[i]["K2"], n, q),
                    "P": _vec(base[i]["P"], n, q), "f": f(np.asarray(z, complex)[None])[0]})
    return out


def _rhs(t: dict, q: int, Cn, Cn_prime) -> np.ndarray:
    return Cn * ((-1) ** (q + 1) * t["dbarK1"] + (-1) ** q * t["K2"]) - Cn_prime * t["P"]


def calibrate_constants(asm: KernelAssembly, quad: QuadratureSpec, z=None):
    """C'_n from f = 1 (q = 0: f(z) = -C'_n int P), then C_n from f = dzbar_1 (q = 1), at z = 0.

    Both identities reproduce constant test functions, so the two solves are
    sequential and well conditioned.
    """
    n = asm.n
    z = np.zeros(n, complex) if z is None else np.asarray(z, complex)
    zero = (0,) * n
    one = FormField(n, 0, {(): Poly(n, {(zero, zero): 1.0})})
    P = kernel_integrals(asm, [one], z, quad.centered(z), terms=("P",))[0]["P"][()]
    Cnp = -1.0 / P
    f = calibration_family(n)[0]
    t = koppelman_terms(asm, [f], z, quad)[0]
    A = t["dbarK1"][0] + t["K2"][0]
    Cn = (1.0 + Cnp * t["P"][0]) / A
    th, thp = theory_constants(n)
    info = {"theory_Cn": th, "theory_Cn_prime": thp, "ratio_Cn": Cn / th, "ratio_Cn_prime": Cnp / thp,
            "P_integral": P, "dbarK1": t["dbarK1"][0], "P_q1": t["P"][0]}
    return complex(Cn), complex(Cnp), info


def calibration_family(n: int) -> list:
    e = np.eye(n, dtype=int)
    zero = (0,) * n
    fam = [FormField(n, 1, {(j,): Poly(n, {(zero, zero): 1.0})}) for j in range(n)]
    fam.append(dbar_form(n, {(zero, tuple(np.ones(n, int))): 1.0}))
    return fam


def dbar_form(n: int, terms: dict) -> FormField:
    """The dbar-closed (0,1)-form dbar g for a polynomial g given as monomials."""
    return FormField(n, 0, {(): Poly(n, terms)}).dbar()


def theory_constants(n: int) -> tuple[complex, complex]:
    from math import factorial
    Cn = 1 / (factorial(n - 1) * (2j * np.pi) ** n)
    return Cn, Cn / n


def _calibrated(asm: KernelAssembly, Cn=None, Cn_prime=None):
    d = load_defaults()["constants"]
    Cn = complex(*d["Cn"]) if Cn is None else Cn
    Cn_prime = complex(*d["Cn_prime"]) if Cn_prime is None else Cn_prime
    return Cn, Cn_prime


def koppelman_check(asm: KernelAssembly, f: FormField, z_list, quad: QuadratureSpec,
                    Cn=None, Cn_prime=None, h: float = 1e-4) -> SolveReport:
    t0 = time.time()
    Cn, Cnp = _calibrated(asm, Cn, Cn_prime)
    rep = SolveReport("koppelman", "koppelman", asm.spec.name, grid_levels=[quad.level])
    worst = 0.0
    bnd = boundary_term_bound(asm, f, quad)
    for z in np.atleast_2d(np.asarray(z_list, complex)):
        _check_interior(asm.spec, z, quad.r_min)
        t = koppelman_terms(asm, [f], z, quad, h)[0]
        rhs = _rhs(t, f.q, Cn, Cnp)
        scale = max(np.abs(t["f"]).max(), 1e-300)
        res = float(np.abs(rhs - t["f"]).max())
        rel = res / scale if np.abs(t["f"]).max() > 0 else res
        worst = max(worst, rel)
        rep.series.append({"z": _zstr(z), "f": _zstr(t["f"]), "rhs": _zstr(rhs), "residual": res,
                           "relative": rel, "dbar_K1": _zstr(Cn * t["dbarK1"]), "K2": _zstr(Cn * t["K2"]),
                           "P": _zstr(Cnp * t["P"])})
    rep.residuals = {"max_relative": worst, "boundary_term_bound": bnd}
    rep.constants = {"Cn": Cn, "Cn_prime": Cnp}
    rep.thresholds = {"koppelman_rel": load_defaults()["thresholds"]["koppelman_rel"]}
    rep.passed = bool(worst < rep.thresholds["koppelman_rel"])
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


def boundary_term_bound(asm: KernelAssembly, f: FormField, quad: QuadratureSpec, z=None) -> float:
    """sum of |f ^ K0| sigma-weights on the boundary grid (K0 carries a factor rho there)."""
    n = asm.n
    g = quad.boundary()
    z = np.zeros(n, complex) if z is None else np.asarray(z, complex)
    p = asm.patched(z, g.points)
    K = asm.kernel_K(None, None, data=p)
    form = F.wedge(_form_dict(asm.alg, f, g.points), asm.component(K, "K0", f.q))
    tot = sum(np.abs(c) for c in form.values()) if form else np.zeros(len(g))
    return float(np.dot(g.weights, tot))


def _check_interior(spec: DomainSpec, z, r_min):
    d, _ = distance_field(spec, np.asarray(z, complex)[None])
    if not (spec(np.asarray(z)[None])[0] < 0 and d[0] >= r_min):
        raise ValueError(f"probe {z} is not an interior point with delta >= {r_min}")


def _zstr(v) -> str:
    return " ".join(f"{complex(x).real:.10g}{complex(x).imag:+.10g}j" for x in np.atleast_1d(v))


# ---------------------------------------------------------------- dbar solution

def dbar_residual(f: FormField, Z, h: float = 1e-5) -> float:
    """max |dbar f| at Z: exact for polynomial coefficients, central differences otherwise."""
    if f.q == f.n:
        return 0.0
    Z = np.atleast_2d(np.asarray(Z, complex))
    if f.polynomial:
        return float(np.abs(f.dbar()(Z)).max(initial=0.0))
    n = f.n
    res = np.zeros((len(Z), len(combos(n, f.q + 1))), complex)
    Js = combos(n, f.q + 1)
    for j in range(n):
        e = np.zeros(n, complex)
        e[j] = h
        dx = (f(Z + e) - f(Z - e)) / (2 * h)
        dy = (f(Z + 1j * e) - f(Z - 1j * e)) / (2 * h)
        d = 0.5 * (dx + 1j * dy)
        for k, I in enumerate(combos(n, f.q)):
            sgn, J = _insert_sign(j, I)
            if sgn:
                res[:, Js.index(J)] += sgn * d[:, k]
    return float(np.abs(res).max(initial=0.0))


def dbar_solve(asm: KernelAssembly, f: FormField, quad: QuadratureSpec, Cn=None, Cn_prime=None,
               closed_tol: float = 1e-6, seed: int = 0):
    """u = (-1)^{q+1} C_n int f ^ K1 and g = C'_n int f ^ P as lazily evaluated form fields."""
    if f.q < 1:
        raise ValueError("dbar_solve needs a (0,q)-form with q >= 1")
    rng = np.random.default_rng(seed)
    from .domains import random_box_points
    pts = random_box_points(asm.spec, 400, rng)
    pts = pts[asm.spec(pts) < 0][:50]
    if dbar_residual(f, pts) > closed_tol:
        raise ValueError("input form is not dbar-closed")
    Cn, Cnp = _calibrated(asm, Cn, Cn_prime)
    n, q = asm.n, f.q
    sign = (-1) ** (q + 1)

    def _pointwise(term, const, deg):
        def field_at(Z):
            Z = np.atleast_2d(np.asarray(Z, complex))
            out = np.zeros((len(Z), len(combos(n, deg))), complex)
            for i, z in enumerate(Z):
                _check_interior(asm.spec, z, quad.r_min)
                r = kernel_integrals(asm, [f], z, quad.centered(z), terms=(term,))[0][term]
                out[i] = const * _vec(r, n, deg)
            return out
        return field_at

    u_all = _pointwise("K1", sign * Cn, q - 1)
    g_all = _pointwise("P", Cnp, q)
    u = FormField(n, q - 1, {I: (lambda Z, k=k: u_all(Z)[:, k]) for k, I in enumerate(combos(n, q - 1))})
    g = FormField(n, q, {I: (lambda Z, k=k: g_all(Z)[:, k]) for k, I in enumerate(combos(n, q))})
    u.evaluate, g.evaluate = u_all, g_all
    return u, g


def dbar_family(n: int = 2) -> list[tuple[str, FormField]]:
    """dbar-closed test forms dbar(p) for a few monomials p."""
    z0 = (0,) * n
    fam = [("dzbar2", FormField(n, 1, {(1,): Poly(n, {(z0, z0): 1.0})}))]
    for name, a, b in (("dbar(zb1 zb2)", (0, 0), (1, 1)), ("dbar(zb1^2 zb2)", (0, 0), (2, 1)),
                       ("dbar(|z1|^2)", (1, 0), (1, 0)), ("dbar(z2 zb1^2)", (0, 1), (2, 0))):
        fam.append((name, dbar_form(n, {(a, b): 1.0})))
    return fam


def l1_norm(f: FormField, grid: Grid) -> float:
    return float(np.dot(grid.weights, np.linalg.norm(f(grid.points), axis=1)))


def sup_probes(spec: DomainSpec, count: int = 12, depth_min: float = 0.05, seed: int = 0) -> np.ndarray:
    """Deterministic interior points with delta >= depth_min, spread toward the boundary."""
    rng = np.random.default_rng(seed)
    from .domains import sample_boundary
    b = sample_boundary(spec, count, rng, center=np.zeros(spec.n))
    nu = complex_normal(spec, b)
    depth = depth_min * (1 + 4 * np.arange(count) / max(count - 1, 1))
    return b - depth[:, None] * nu


def dbar_pipeline(asm: KernelAssembly, family, probes, quad_levels, sup_points=None,
                  h: float = 1e-4) -> SolveReport:
    """Residual |dbar u - f - g| at probes and sup|g| / ||f||_L1 per family member, per grid level."""
    t0 = time.time()
    Cn, Cnp = _calibrated(asm)
    th = load_defaults()["thresholds"]
    rep = SolveReport("dbar-solve", "dbar-solve", asm.spec.name, grid_levels=[q.level for q in quad_levels])
    names = [nm for nm, _ in family]
    forms = [f for _, f in family]
    for f in forms:
        if dbar_residual(f, probes) > 1e-6:
            raise ValueError("input form is not dbar-closed")
    if sup_points is None:
        sup_points = sup_probes(asm.spec)
    worst = {}
    ratios = {}
    for quad in quad_levels:
        lv = quad.level
        worst[lv] = 0.0
        for z in np.atleast_2d(probes):
            _check_interior(asm.spec, z, quad.r_min)
            T = koppelman_terms(asm, forms, z, quad, h)
            for nm, f, t in zip(names, forms, T):
                du = Cn * ((-1) ** (f.q + 1) * t["dbarK1"])
                g = Cnp * t["P"]
                fz = t["f"]
                scale = max(np.abs(f(probes)).max(), 1e-300)
                res = float(np.abs(du - fz - g).max()) / scale
                worst[lv] = max(worst[lv], res)
                rep.series.append({"level": lv, "form": nm, "z": _zstr(z), "residual_rel": res,
                                   "dbar_u": _zstr(du), "f": _zstr(fz), "g": _zstr(g)})
        vol = quad.volume()
        gsup = np.zeros(len(forms))
        for z in np.atleast_2d(sup_points):
            r = kernel_integrals(asm, forms, z, quad.centered(z), terms=("P",))
            for k, (f, rr) in enumerate(zip(forms, r)):
                gsup[k] = max(gsup[k], np.abs(Cnp * _vec(rr["P"], f.n, f.q)).max())
        for nm, f, gs in zip(names, forms, gsup):
            l1 = l1_norm(f, vol)
            ratios.setdefault(nm, {})[lv] = gs / l1
            rep.series.append({"level": lv, "form": nm, "sup_g": gs, "L1_f": l1, "ratio": gs / l1})
    levels = [q.level for q in quad_levels]
    C = {lv: max(r[lv] for r in ratios.values()) for lv in levels}
    rep.constants = {"sup_g_over_L1": C, "ratios": ratios, "Cn": Cn, "Cn_prime": Cnp}
    rep.residuals = {"max_relative": worst}
    ok = all(w < th["dbar_rel"] for w in worst.values())
    if len(levels) > 1:
        d = _rel_delta(C[levels[-1]], C[levels[-2]])
        rep.deltas = {"sup_g_over_L1": d}
        ok = ok and d <= th["stability_rel"]
    rep.passed = bool(ok)
    rep.thresholds = {"dbar_rel": th["dbar_rel"], "stability_rel": th["stability_rel"]}
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


# ---------------------------------------------------------------- uniform integrability

def _kernel_abs(asm: KernelAssembly, z, zeta, which="K1", Cn=None) -> np.ndarray:
    """Sum of absolute component coefficients of the calibrated kernel component."""
    Cn = _calibrated(asm, Cn)[0]
    p = asm.patched(z, zeta)
    K = asm.component(asm.kernel_K(None, None, data=p, raw=True), which)
    tot = np.zeros(len(p.S))
    for c in K.values():
        tot += np.abs(c)
    return abs(Cn) * tot


def _polydisc_samples(Vz, radii, count, seed):
    """Sobol points uniform in the polydisc sum lam_k v_k, |lam_k| < radii[k]."""
    n = len(radii)
    u = qmc.Sobol(2 * n, scramble=True, seed=seed).random(count)
    lam = np.sqrt(u[:, :n]) * radii * np.exp(2j * np.pi * u[:, n:])
    return lam @ Vz, lam


def shell_integrals(asm: KernelAssembly, z, eps, n_shells: int = 12, count: int = 4096, seed: int = 0,
                    c0: float = C0):
    """int over Omega cap (P_{2^-i eps}(z) minus P_{2^-i-1 eps}(z)) of |K1(z, .)| dV, i < n_shells."""
    spec = asm.spec
    z = np.asarray(z, complex)
    V, _ = extremal_frames(spec, z[None], eps, eps0=np.inf)
    V = V[0]
    scales = eps * 2.0 ** -np.arange(n_shells + 1)
    radii = np.stack([c0 * tau_many(spec, z, V, e, eps0=np.inf) for e in scales])
    out = np.zeros(n_shells)
    for i in range(n_shells):
        d, lam = _polydisc_samples(V, radii[i], count, seed + i)
        inner = np.all(np.abs(lam) < radii[i + 1], axis=1)
        zeta = z + d
        keep = (~inner) & (spec(zeta) < 0)
        vol = np.prod(np.pi * radii[i] ** 2)
        if keep.any():
            out[i] = vol * _kernel_abs(asm, z, zeta[keep]).sum() / count
    return out, radii


def _fit(x, y):
    lx, ly = np.log(x), np.log(y)
    A = np.stack([lx, np.ones_like(lx)], 1)
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ coef
    ss = ((ly - ly.mean()) ** 2).sum()
    r2 = 1 - ((ly - pred) ** 2).sum() / ss if ss > 0 else 1.0
    return float(coef[0]), float(r2)


def boundary_proximate(spec: DomainSpec, anchors, eps, frac: float = 0.5) -> np.ndarray:
    """Points at depth frac * eps below boundary anchors along the inner normal."""
    b = np.atleast_2d(np.asarray(anchors, complex))
    return b - frac * eps * complex_normal(spec, b)


def default_anchors(spec: DomainSpec) -> np.ndarray:
    """Boundary anchor points for the uniform-integrability sweep."""
    if spec.name == "BALL2":
        return np.array([[1, 0], [0.6, 0.8j]], complex)
    if spec.name == "EGG24":
        return np.array([[1, 0], [0, 1], [np.sqrt(0.5), 0.5 ** 0.25]], complex)
    return sample_boundary(spec, 3, np.random.default_rng(0))


def uniform_integrability(asm: KernelAssembly, anchors, eps_list=tuple(2.0 ** -k for k in range(3, 8)),
                          n_shells: int = 12, count: int = 4096, seed: int = 0) -> SolveReport:
    """Shell sums of |K1| over P_eps(z) for z at depth eps/2; log-log slope of the sup over z."""
    t0 = time.time()
    spec = asm.spec
    th = load_defaults()["thresholds"]
    rep = SolveReport("uniform-int", "uniform-int", spec.name)
    tot = np.zeros((len(eps_list), len(np.atleast_2d(anchors))))
    cauchy = 0.0
    for a, eps in enumerate(eps_list):
        Z = boundary_proximate(spec, anchors, eps)
        for b, z in enumerate(Z):
            sh, radii = shell_integrals(asm, z, eps, n_shells, count, seed)
            tot[a, b] = sh.sum()
            cauchy = max(cauchy, sh[-1] / sh.sum())
            for i, v in enumerate(sh):
                rep.series.append({"eps": eps, "z": _zstr(z), "shell": i, "integral": v,
                                   "partial_sum": sh[:i + 1].sum(), "tau": _zstr(radii[i] / C0)})
    sup = tot.max(1)
    slope, r2 = _fit(np.array(eps_list), sup)
    per_z = [_fit(np.array(eps_list), tot[:, b]) for b in range(tot.shape[1])]
    m = spec.m
    target = 1 / m - th["slope_slack"]
    rep.constants = {"slope": slope, "r2": r2, "per_anchor": per_z, "target_slope": target,
                     "sup_totals": sup, "exponent_tau_bound": 1 / spec.type_bound}
    rep.residuals = {"last_shell_fraction": cauchy}
    if r2 < th["r2_min"]:
        rep.passed = False
        rep.notes.append(f"inconclusive: R^2 = {r2:.3f} < {th['r2_min']}")
    else:
        rep.passed = bool(slope >= target)
    rep.thresholds = {"slope_min": target, "r2_min": th["r2_min"]}
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


# ---------------------------------------------------------------- L1 boundary estimate

def solution_values(asm: KernelAssembly, forms: list, Z, quad: QuadratureSpec, Cn=None) -> np.ndarray:
    """u = (-1)^{q+1} C_n int f ^ K1 at each row of Z, for (0,1)-forms: array (len(Z), len(forms))."""
    Cn = _calibrated(asm, Cn)[0]
    out = np.zeros((len(Z), len(forms)), complex)
    for i, z in enumerate(np.atleast_2d(Z)):
        r = kernel_integrals(asm, forms, z, quad.centered(z), terms=("K1",))
        for k, (f, rr) in enumerate(zip(forms, r)):
            out[i, k] = (-1) ** (f.q + 1) * Cn * rr["K1"].get((), 0)
    return out


def torus_deviation(asm: KernelAssembly, forms: list, z, quad: QuadratureSpec, seed: int = 0) -> float:
    """max relative change of |u| under a random torus rotation of z."""
    rng = np.random.default_rng(seed)
    ph = np.exp(2j * np.pi * rng.random(asm.n))
    u = solution_values(asm, forms, np.stack([z, z * ph]), quad)
    a, b = np.abs(u[0]), np.abs(u[1])
    return float(np.max(np.abs(a - b) / np.maximum(a, 1e-300)))


def knorm_integral(spec: DomainSpec, f: FormField, level: int) -> float:
    """int_Omega ||f||_k dV on the torus-reduced grid (|f|_k must be torus invariant)."""
    g = reinhardt_grid(spec, level)
    return float(np.dot(g.weights, form_knorm(spec, f, g.points)))


def boundary_l1(asm: KernelAssembly, forms: list, quad: QuadratureSpec, offset: float) -> np.ndarray:
    """int_{offset surface} |u| dsigma for each form (torus-reduced boundary grid)."""
    from .quadrature import boundary_grid
    g = boundary_grid(asm.spec, quad.level, offset=offset, torus=True)
    u = solution_values(asm, forms, g.points, quad)
    return g.weights @ np.abs(u)


def _surface_patch(spec: DomainSpec, foot, V, radii, count: int, seed: int):
    """Sobol points on {rho = 0} near ``foot`` as a graph over (Im lam_1, lam_2) in the frame V,
    with surface-measure weights. Returns points, weights, frame coordinates."""
    n = spec.n
    nu = V[0]
    u = qmc.Sobol(2 * n - 1, scramble=True, seed=seed).random(count)
    t = (2 * u[:, 0] - 1) * radii[0]
    lam = np.sqrt(u[:, 1:n]) * radii[1:] * np.exp(2j * np.pi * u[:, n:])
    base = foot + 1j * t[:, None] * nu + lam @ V[1:]
    # outward offset s with rho(base + s nu) = 0, Newton from 0
    s = np.zeros(count)
    for _ in range(30):
        p = base + s[:, None] * nu
        r = spec(p)
        dr = 2 * np.real(np.sum(spec.dbar(p) * np.conj(nu), axis=1))  # d rho / d s along real nu
        step = r / dr
        s -= step
        if np.abs(step).max() < 1e-15:
            break
    pts = base + s[:, None] * nu
    g = spec.real_grad(pts)
    dirs = [1j * nu] + [c * v for v in V[1:] for c in (1, 1j)]
    def real(v):
        return np.r_[v.real, v.imag]
    gs = g @ real(nu)
    slopes = np.stack([-(g @ real(d)) / gs for d in dirs], 1)
    jac = np.sqrt(1 + (slopes ** 2).sum(1))
    vol = 2 * radii[0] * np.prod(np.pi * radii[1:] ** 2)
    return pts, vol * jac / count


def ring_integrals(asm: KernelAssembly, foot, depth: float, n_rings: int = 6, count: int = 8192,
                   seed: int = 0, c0: float = C0):
    """int over boundary rings Q^i = P_{2^i d}(zeta) minus P_{2^{i-1} d}(zeta) of |K1(z, zeta) ^ f(zeta)|
    for f the frame-dual forms at zeta = foot - depth nu; rows i = 1..n_rings, columns = frame index."""
    spec = asm.spec
    n = spec.n
    Cn = _calibrated(asm)[0]
    foot = np.asarray(foot, complex)
    zeta = foot - depth * complex_normal(spec, foot[None])[0]
    V, _ = extremal_frames(spec, zeta[None], depth, eps0=np.inf)
    V = V[0]
    tau_d = tau_many(spec, zeta, V, depth, eps0=np.inf)
    out = np.zeros((n_rings, n))
    for i in range(1, n_rings + 1):
        outer = c0 * tau_many(spec, zeta, V, 2.0 ** i * depth, eps0=np.inf)
        inner = c0 * tau_many(spec, zeta, V, 2.0 ** (i - 1) * depth, eps0=np.inf)
        pts, w = _surface_patch(spec, foot, V, outer, count, seed + i)
        lam = (pts - zeta) @ np.conj(V).T
        inside = np.all(np.abs(lam) < outer, axis=1) & ~np.all(np.abs(lam) < inner, axis=1)
        if not inside.any():
            continue
        z = pts[inside]
        p = asm.patched(z, zeta[None])
        K1 = asm.component(asm.kernel_K(None, None, data=p, raw=True), "K1", 1)
        for j in range(n):
            # f = dual form of v_j: f(v_k) = delta_jk, i.e. coefficients conj(V[j])
            fd = {asm.alg.zetabar(k): np.full(len(z), np.conj(V[j, k])) for k in range(n)}
            form = F.wedge(fd, K1)
            val = np.zeros(len(z))
            for m, c in form.items():
                val += np.abs(c)
            out[i - 1, j] = abs(Cn) * np.dot(w[inside], val)
    return out, tau_d


def l1_boundary_estimate(asm: KernelAssembly, family, quad_levels, offsets=(1e-3, 2e-3),
                         ring_feet=None, ring_depth: float = 1e-6, n_rings: int = 16, tail_offset: int = 3,
                         c0: float = C0) -> SolveReport:
    t0 = time.time()
    spec = asm.spec
    if not family:
        raise ValueError("empty form family")
    th = load_defaults()["thresholds"]
    names = [nm for nm, _ in family]
    forms = [f for _, f in family]
    for f in forms:
        if not f.is_dbar_closed():
            raise ValueError("input form is not dbar-closed")
    rep = SolveReport("l1-estimate", "l1-estimate", spec.name, grid_levels=[q.level for q in quad_levels])
    ratios = {}
    for quad in quad_levels:
        rhs = np.array([knorm_integral(spec, f, quad.level) for f in forms])
        for off in offsets:
            lhs = boundary_l1(asm, forms, quad, off)
            for nm, a, b in zip(names, lhs, rhs):
                ratios.setdefault(nm, {})[(quad.level, off)] = a / b
                rep.series.append({"kind": "ratio", "level": quad.level, "offset": off, "form": nm,
                                   "boundary_L1_u": a, "knorm_L1_f": b, "ratio": a / b})
    lv = [q.level for q in quad_levels]
    deltas = {}
    for nm in names:
        for off in offsets:
            if len(lv) > 1:
                deltas[f"{nm} @ {off:g}"] = _rel_delta(ratios[nm][(lv[-1], off)], ratios[nm][(lv[-2], off)])
        if len(offsets) > 1:
            deltas[f"{nm} offsets"] = _rel_delta(ratios[nm][(lv[-1], offsets[0])], ratios[nm][(lv[-1], offsets[1])])
    C = max(max(r.values()) for r in ratios.values())
    # scaling check: f -> 10 f on the coarsest setting
    q0 = quad_levels[0]
    f10 = forms[0].scale(10.0)
    r10 = boundary_l1(asm, [f10], q0, offsets[0])[0] / knorm_integral(spec, f10, q0.level)
    scale_err = _rel_delta(r10, ratios[names[0]][(lv[0], offsets[0])])
    # rings
    if ring_feet is None:
        ring_feet = np.array([[1, 0], [np.sqrt(0.5), np.sqrt(0.5)]], complex) if spec.name == "BALL2" else None
    decay = {}
    ok_rings = True
    # below this ring the polydiscs sit where |rho + S/K0| ~ delta (constant c0^2/(4 K0) regime);
    # the decay rate is fitted on the rings past it
    i_star = int(np.ceil(np.log2(4 * asm.K0 / c0 ** 2)))
    i_tail = i_star + tail_offset
    if ring_feet is not None:
        for foot in np.atleast_2d(ring_feet):
            R, tau_d = ring_integrals(asm, foot, ring_depth, n_rings, c0=c0)
            ii = np.arange(1, n_rings + 1)
            for j in range(spec.n):
                good = R[:, j] > 0
                tail = good & (ii >= i_tail)
                full = -np.polyfit(ii[good], np.log2(R[good, j]), 1)[0]
                rate = -np.polyfit(ii[tail], np.log2(R[tail, j]), 1)[0] if tail.sum() >= 2 else np.nan
                const = (R[:, j] * 2.0 ** (ii / 2) * ring_depth / tau_d[j]).max()
                decay[f"{_zstr(foot)} v{j + 1}"] = {"rate": rate, "rate_all_rings": full, "constant": const,
                                                   "tail_from": i_tail}
                ok_rings &= bool(rate >= 0.5 * (1 - th["ring_slack"]))
                for i in range(n_rings):
                    rep.series.append({"kind": "ring", "foot": _zstr(foot), "frame_index": j + 1, "ring": i + 1,
                                       "integral": R[i, j], "bound_scale": tau_d[j] / (2 ** ((i + 1) / 2) * ring_depth)})
    rep.constants = {"C": C, "ratios": {nm: {f"L{k[0]} offset {k[1]:g}": v for k, v in r.items()}
                                        for nm, r in ratios.items()}, "ring_decay": decay}
    rep.deltas = deltas
    rep.residuals = {"scale_invariance": scale_err,
                     "torus_deviation": torus_deviation(asm, forms, boundary_proximate(spec, [[0.6, 0.8j]], 2e-2)[0],
                                                        quad_levels[0])}
    rep.thresholds = {"stability_rel": th["stability_rel"], "ring_rate_min": 0.5 * (1 - th["ring_slack"]),
                      "scale_invariance_tol": th["scale_invariance_tol"]}
    rep.notes.append("boundary values are taken on offset surfaces {delta = offset}")
    stable = all(d <= th["stability_rel"] for d in deltas.values())
    rep.passed = bool(np.isfinite(C) and stable and ok_rings and scale_err <= th["scale_invariance_tol"])
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


# ---------------------------------------------------------------- Poincare d-solver

@dataclass
class OneForm:
    """w = sum_j a_j dz_j + b_j dzbar_j; ``func`` maps Z (N, n) to (a, b), each (N, n)."""
    n: int
    func: callable

    def __call__(self, Z):
        return self.func(np.atleast_2d(np.asarray(Z, dtype=complex)))

    def stacked(self, Z) -> np.ndarray:
        return np.concatenate(self(Z), axis=1)


def _wirtinger(func, Z, h: float = 1e-4):
    """Lists (d/dz_l, d/dzbar_l) of an array-valued map; central differences, one Richardson level."""
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    n = Z.shape[1]
    dz, dzb = [], []
    for l in range(n):
        e = np.zeros(n, complex)
        e[l] = 1
        d = {}
        for key, vec in (("x", e), ("y", 1j * e)):
            c = [(func(Z + hh * vec) - func(Z - hh * vec)) / (2 * hh) for hh in (h, h / 2)]
            d[key] = (4 * c[1] - c[0]) / 3
        dz.append(0.5 * (d["x"] - 1j * d["y"]))
        dzb.append(0.5 * (d["x"] + 1j * d["y"]))
    return dz, dzb


def psh_current(n: int, polys=()) -> CurrentField:
    """Theta = i ddbar(|z|^2 + sum |p|^2) for holomorphic polynomials p: theta = I + sum dp dp^*."""
    grads = [[p.deriv(tuple(int(i == j) for i in range(n)), (0,) * n) for j in range(n)] for p in polys]

    def theta(Z):
        out = np.broadcast_to(np.eye(n, dtype=complex), (len(Z), n, n)).copy()
        for g in grads:
            G = np.stack([gj(Z) for gj in g], -1)
            out += G[:, :, None] * np.conj(G[:, None, :])
        return out
    return CurrentField(n, theta)


def random_psh_current(n: int, degree: int = 3, count: int = 2, seed: int = 0) -> CurrentField:
    """psh_current with random holomorphic polynomials of the given degree."""
    rng = np.random.default_rng(seed)
    polys = []
    for _ in range(count):
        terms = {}
        for a in np.ndindex(*(degree + 1,) * n):
            if 1 <= sum(a) <= degree:
                terms[(a, (0,) * n)] = 0.5 * (rng.normal() + 1j * rng.normal())
        polys.append(Poly(n, terms))
    return psh_current(n, polys)


def coordinate_current(n: int, j: int = 0) -> CurrentField:
    """Theta = i dz_j ^ dzbar_j."""
    E = np.zeros((n, n), complex)
    E[j, j] = 1
    return CurrentField(n, lambda Z: np.broadcast_to(E, (len(Z), n, n)).copy())


def divisor_current(h: Poly, s: float) -> CurrentField:
    """Smoothed divisor current i ddbar log(|h|^2 + s^2): theta = s^2 dh dh^* / (|h|^2 + s^2)^2."""
    n = h.n
    grads = [h.deriv(tuple(int(i == j) for i in range(n)), (0,) * n) for j in range(n)]

    def theta(Z):
        H = h(Z)
        G = np.stack([g(Z) for g in grads], -1)
        den = (np.abs(H) ** 2 + s * s) ** 2
        return s * s * G[:, :, None] * np.conj(G[:, None, :]) / den[:, None, None]
    return CurrentField(n, theta)


def _ball_probes(n: int, count: int, radius: float, seed: int, center=None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    Z *= radius * rng.uniform(size=(count, 1)) ** (1 / (2 * n)) / np.linalg.norm(Z, axis=1, keepdims=True)
    return Z + (0 if center is None else np.asarray(center, complex))


def poincare_d_solve(theta: CurrentField, center=None, z_list=None, n_t: int = 16,
                     closed_tol: float = 1e-6) -> OneForm:
    """Radial homotopy primitive w = int_0^1 t i_X Theta(c + t (z - c)) dt, X = z - c.

    With Theta = i sum theta_jk dz_j ^ dzbar_k and I_jk = int_0^1 t theta_jk dt:
    w = i sum I_jk (x_j dzbar_k - conj(x_k) dz_j). Gauss-Legendre in t with ``n_t``
    nodes is exact for polynomial theta of degree <= 2 n_t - 2.
    """
    n = theta.n
    c = np.zeros(n, complex) if center is None else np.asarray(center, complex)
    probes = _ball_probes(n, 16, 0.5, 0, c) if z_list is None else np.atleast_2d(np.asarray(z_list, complex))
    th0 = theta(probes)
    scale = max(float(np.abs(th0).max()), 1.0)
    if theta.closedness_residual(probes) > closed_tol * scale:
        raise ValueError("Theta is not closed")
    t, wt = gauss(0.0, 1.0, n_t)

    def func(Z):
        X = Z - c
        a = np.zeros(Z.shape, complex)
        b = np.zeros(Z.shape, complex)
        for tk, wk in zip(t, wt):
            I = wk * tk * theta(c + tk * X)
            b += 1j * np.einsum("njk,nj->nk", I, X)
            a -= 1j * np.einsum("njk,nk->nj", I, np.conj(X))
        return a, b
    return OneForm(n, func)


def d_residual(w: OneForm, theta: CurrentField, Z, h: float = 1e-4) -> float:
    """max |dw - Theta| over the (1,1), (2,0) and (0,2) coefficients, by finite differences."""
    Z = np.atleast_2d(np.asarray(Z, complex))
    n = w.n
    dz, dzb = _wirtinger(w.stacked, Z, h)
    th = theta(Z)
    res = 0.0
    for j in range(n):
        for k in range(n):
            # coefficient of dz_j ^ dzbar_k is d_j b_k - dbar_k a_j
            c11 = dz[j][:, n + k] - dzb[k][:, j]
            res = max(res, float(np.abs(c11 - 1j * th[:, j, k]).max()))
            res = max(res, float(np.abs(dz[j][:, k] - dz[k][:, j]).max()),
                      float(np.abs(dzb[j][:, n + k] - dzb[k][:, n + j]).max()))
    return res


def oneform_knorm(spec: DomainSpec, w: OneForm, Z, delta) -> np.ndarray:
    """max_j (|<dz-part; v_j>| + |<dzbar-part; v_j>|) tau_j / delta in the extremal frame.

    For a fixed complex direction v the sup of |w(e^{it} v)| over t is |a'| + |b'|.
    """
    Z = np.atleast_2d(np.asarray(Z, complex))
    a, b = w(Z)
    V, tau = extremal_frames(spec, Z, delta, eps0=np.inf)
    ap = np.einsum("ni,nji->nj", a, V)
    bp = np.einsum("ni,nji->nj", b, np.conj(V))
    return np.max((np.abs(ap) + np.abs(bp)) * tau / np.asarray(delta)[:, None], axis=1)


def _collar_nodes(spec: DomainSpec, grid: Grid, depth: float):
    """Grid nodes with a converged foot point and delta <= depth; returns (points, weights, delta)."""
    d, _, ok = foot_points(spec, grid.points)
    keep = ok & (d > 0) & (d <= depth) & (spec(grid.points) < 0)
    return grid.points[keep], grid.weights[keep], d[keep]


def homotopy_alpha(spec: DomainSpec, count: int = 1000, seed: int = 0, exponent=None,
                   t_min: float = 0.05) -> np.ndarray:
    """alpha samples tau(tz, tv, delta(tz)/2) / ((delta(tz)/delta(z))^{1/m} tau(z, v, delta(z)/2))
    over random (z, v, t); v unit and tv taken literally (tau scales as 1/|tv|)."""
    rng = np.random.default_rng(seed)
    p = 1.0 / spec.m if exponent is None else exponent
    out = []
    while sum(len(o) for o in out) < count:
        Z = random_box_points(spec, 4 * count, rng)
        Z = Z[spec(Z) < 0]
        V = rng.normal(size=Z.shape) + 1j * rng.normal(size=Z.shape)
        V /= np.linalg.norm(V, axis=1, keepdims=True)
        t = rng.uniform(t_min, 1.0, len(Z))
        dz, _, ok1 = foot_points(spec, Z)
        dt, _, ok2 = foot_points(spec, t[:, None] * Z)
        ok = ok1 & ok2 & (dz > 0) & (dt > 0)
        Z, V, t, dz, dt = Z[ok], V[ok], t[ok], dz[ok], dt[ok]
        a = tau_many(spec, t[:, None] * Z, t[:, None] * V, dt / 2, eps0=np.inf)
        b = tau_many(spec, Z, V, dz / 2, eps0=np.inf)
        out.append(a / ((dt / dz) ** p * b))
    return np.concatenate(out)[:count]


def d_norm_estimate(spec: DomainSpec, theta: CurrentField, quad: QuadratureSpec, center=None,
                    depth: float = 0.5, scale: float = 3.7, n_alpha: int = 1000, seed: int = 0) -> SolveReport:
    """int_W ||w||_k dV against int_W delta ||Theta||_k dV for the homotopy primitive w,
    W the collar {delta <= depth}; plus the homotopy-radius spot-check."""
    t0 = time.time()
    th = load_defaults()["thresholds"]
    rep = SolveReport("d-solve", "d-solve", spec.name, grid_levels=[quad.level])
    Z, wts, delta = _collar_nodes(spec, quad.volume(), depth)

    def ratio(T):
        w = poincare_d_solve(T, center)
        lhs = float(np.dot(wts, oneform_knorm(spec, w, Z, delta)))
        k, _, _ = current_norms(spec, T, Z, delta)
        rhs = float(np.dot(wts, delta * k))
        return lhs, rhs

    lhs, rhs = ratio(theta)
    lhs_c, rhs_c = ratio(CurrentField(theta.n, lambda X: scale * theta(X)))
    r, rc = lhs / rhs, lhs_c / rhs_c
    probes = _ball_probes(spec.n, 8, 0.5, seed + 1)
    probes = probes[spec(probes) < 0]
    dres = d_residual(poincare_d_solve(theta, center), theta, probes)
    alphas = homotopy_alpha(spec, n_alpha, seed)
    rep.constants = {"ratio": r, "lhs_int_w_knorm": lhs, "rhs_int_delta_theta_knorm": rhs,
                     "alpha_min": float(alphas.min()), "alpha_exponent": 1.0 / spec.m}
    rep.residuals = {"dw_minus_theta": dres, "scale_invariance": _rel_delta(rc, r)}
    rep.thresholds = {"poincare_tol": th["poincare_tol"], "scale_invariance_tol": th["scale_invariance_tol"],
                      "alpha_min": th["alpha_min"]}
    rep.series = [{"kind": "alpha", "index": i, "alpha": a} for i, a in enumerate(alphas)]
    rep.notes.append(f"W = collar delta <= {depth:g}, {len(Z)} nodes")
    rep.passed = bool(np.isfinite(r) and dres < th["poincare_tol"]
                      and rep.residuals["scale_invariance"] <= th["scale_invariance_tol"]
                      and alphas.min() >= th["alpha_min"])
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


# ---------------------------------------------------------------- currents and divisors

def current_integrals(spec: DomainSpec, theta: CurrentField, grid: Grid, depth: float = np.inf,
                      check_positive: bool = True) -> tuple[float, float]:
    """(int delta ||Theta||_k dV, int delta ||Theta||_E dV) over grid nodes with delta <= depth."""
    Z, wts, delta = _collar_nodes(spec, grid, depth)
    if check_positive and not theta.check_positive(Z, tol=1e-10 * max(1.0, float(np.abs(theta(Z[:64])).max()))):
        raise ValueError("Theta is not positive")
    k, E, _ = current_norms(spec, theta, Z, delta)
    return float(np.dot(wts, delta * k)), float(np.dot(wts, delta * E))


def divisor_grid(spec: DomainSpec, h: Poly, s: float, level: int) -> Grid:
    """Volume grid for smoothed divisor currents: torus-reduced and graded toward {z2 = 0}
    when the domain is Reinhardt and h a monomial in z2 only; generic polar grid otherwise."""
    z0 = (0,) * spec.n
    mono = len(h.terms) == 1 and all(b == z0 for _, b in h.terms)
    if spec.reinhardt and spec.n == 2 and mono:
        (a, _), = h.terms
        if a[0] == 0:
            grade = int(np.ceil(np.log2(1.0 / s))) + 2
            return reinhardt_grid(spec, level, alpha_grade=grade)
        if a[1] == 0:
            g = reinhardt_grid(spec, level, alpha_grade=int(np.ceil(np.log2(1.0 / s))) + 2)
            return Grid(g.points[:, ::-1].copy(), g.weights)
    return QuadratureSpec(spec, level).volume()


def current_norm_comparison(spec: DomainSpec, theta: CurrentField, grids: list, depth: float = np.inf) -> SolveReport:
    """Ratio int delta ||Theta||_k / int delta ||Theta||_E per grid (coarse to fine)."""
    t0 = time.time()
    th = load_defaults()["thresholds"]
    rep = SolveReport("current-compare", "current-compare", spec.name, grid_levels=list(range(len(grids))))
    ratios = []
    for i, g in enumerate(grids):
        a, b = current_integrals(spec, theta, g, depth)
        ratios.append(a / b)
        rep.series.append({"grid": i, "nodes": len(g), "int_delta_knorm": a, "int_delta_E": b, "ratio": a / b})
    rep.constants = {"ratio": ratios[-1], "ratios": ratios}
    if len(ratios) > 1:
        rep.deltas = {"ratio": _rel_delta(ratios[-1], ratios[-2])}
    rep.thresholds = {"stability_rel": th["stability_rel"], "current_ratio_cap": th["current_ratio_cap"]}
    rep.passed = bool(np.isfinite(ratios[-1]) and ratios[-1] <= th["current_ratio_cap"]
                      and all(d <= th["stability_rel"] for d in rep.deltas.values()))
    rep.runtimes = {"total_s": time.time() - t0}
    return rep


def divisor_integral(spec: DomainSpec, h: Poly, n_r: int = 240, n_phi: int = 128, k: int = 4):
    """int_{X cap Omega} delta dmu for X = {h = 0} in C^2, meshing X as a multivalued graph
    over the disc |w| < box in the coordinate h is not solved for. Returns None if X is
    singular on the mesh (vanishing leading coefficient or gradient)."""
    if spec.n != 2:
        raise NotImplementedError("divisor meshing is implemented for n = 2")
    z0 = (0, 0)
    hol = {a: c for (a, b), c in h.terms.items() if b == z0}
    if len(hol) != len(h.terms):
        raise ValueError("h must be holomorphic")
    deg2 = max((a[1] for a in hol), default=0)
    swap = deg2 == 0
    if swap:
        hol = {(a[1], a[0]): c for a, c in hol.items()}
        deg2 = max((a[1] for a in hol), default=0)
    if deg2 == 0:
        return 0.0  # h constant: empty divisor
    # polar mesh of the parameter disc: Gauss panels in r, uniform in phi
    edges = np.linspace(0.0, spec.box, n_r + 1)
    r, wr = gauss(edges[:-1], edges[1:], k)
    r, wr = r.ravel(), wr.ravel()
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    W = (r[:, None] * np.exp(1j * phi)).ravel()
    wA = (wr * r)[:, None].repeat(n_phi, 1).ravel() * 2 * np.pi / n_phi
    # coefficients of h as a polynomial in the second variable
    C = np.zeros((len(W), deg2 + 1), complex)
    for (a1, a2), c in hol.items():
        C[:, a2] += c * W ** a1
    lead = C[:, deg2]
    if np.any(np.abs(lead) < 1e-12):
        return None
    comp = np.zeros((len(W), deg2, deg2), complex)
    comp[:, 0, :] = -C[:, deg2 - 1::-1] / lead[:, None]
    if deg2 > 1:
        comp[:, 1:, :-1] = np.eye(deg2 - 1)
    roots = np.linalg.eigvals(comp)  # (N, deg2)
    total = 0.0
    for j in range(deg2):
        pts = np.stack([W, roots[:, j]], -1)
        if swap:
            pts = pts[:, ::-1]
        h1 = Poly(2, {((a[1], a[0]) if swap else a, z0): c for a, c in hol.items()})
        g1 = h1.deriv((1, 0), (0, 0))(pts)
        g2 = h1.deriv((0, 1), (0, 0))(pts)
        gp, gs = (g2, g1) if swap else (g1, g2)  # d h / d param, d h / d solved
        if np.any(np.abs(gs) < 1e-12):
            return None
        jac = 1 + np.abs(gp / gs) ** 2  # area of the graph w -> (w, phi(w)), phi' = -h_w / h_s
        inside = spec(pts) < 0
        d = np.zeros(len(pts))
        if inside.any():
            dd, _, ok = foot_points(spec, pts[inside])
            dd = np.where(ok, dd, -spec(pts[inside]) / spec.lipschitz())
            d[inside] = dd
        total += float(np.dot(wA, d * jac))
    return total


def transverse_mass(spec: DomainSpec, h: Poly, s: float, n_r: int = 64, n_phi: int = 32) -> float:
    """Mass of the smoothed current on the complex normal line to X at the deepest mesh
    point p of X: int_{|w| < delta(p)} <Theta_s; n, n> dA(w), n = conj(grad h(p)) / |grad h(p)|.
    Tends to the Lelong normalization of i ddbar log(|h|^2 + s^2) per unit multiplicity."""
    p = _deepest_divisor_point(spec, h)
    n = spec.n
    G = np.array([h.deriv(tuple(int(i == j) for i in range(n)), (0,) * n)(p[None])[0] for j in range(n)])
    nv = np.conj(G) / np.linalg.norm(G)
    R = float(foot_points(spec, p[None])[0][0])
    r, wr = gauss(np.linspace(0, R, 17)[:-1], np.linspace(0, R, 17)[1:], n_r // 16)
    r, wr = r.ravel(), wr.ravel()
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    W = (r[:, None] * np.exp(1j * phi)).ravel()
    wA = (wr * r)[:, None].repeat(n_phi, 1).ravel() * 2 * np.pi / n_phi
    th = divisor_current(h, s)(p + W[:, None] * nv)
    val = np.einsum("nij,i,j->n", th, nv, np.conj(nv)).real
    return float(np.dot(wA, val))


def _deepest_divisor_point(spec: DomainSpec, h: Poly) -> np.ndarray:
    rng = np.random.default_rng(0)
    Z = random_box_points(spec, 4000, rng)
    Z = Z[spec(Z) < 0]
    # Newton steps onto X along conj(grad h)
    n = spec.n
    grads = [h.deriv(tuple(int(i == j) for i in range(n)), (0,) * n) for j in range(n)]
    for _ in range(30):
        G = np.stack([g(Z) for g in grads], -1)
        Z = Z - (h(Z) / np.maximum((np.abs(G) ** 2).sum(1), 1e-300))[:, None] * np.conj(G)
    ok = (np.abs(h(Z)) < 1e-12) & (spec(Z) < 0)
    if not ok.any():
        raise ValueError("no point of X found inside the domain")
    Z = Z[ok]
    return Z[np.argmin(spec(Z))]


def blaschke_check(spec: DomainSpec, h: Poly, s_list=(0.2, 0.1, 0.05), level: int = 1,
                   s_ref: float = 0.2, direct_oracle=None) -> SolveReport:
    """int delta ||Theta_s||_E dV for smoothed divisor currents against c * int_X delta dmu,
    c the Lelong normalization measured as the transverse mass of Theta_{s_ref}."""
    t0 = time.time()
    th = load_defaults()["thresholds"]
    rep = SolveReport("blaschke", "blaschke", spec.name, grid_levels=[level])
    direct = divisor_integral(spec, h)
    values = {}
    for s in s_list:
        theta = divisor_current(h, s)
        g = divisor_grid(spec, h, s, level)
        Z, wts, delta = _collar_nodes(spec, g, np.inf)
        E = np.linalg.norm(theta(Z), ord=2, axis=(-2, -1))
        values[s] = float(np.dot(wts, delta * E))
        rep.series.append({"s": s, "int_delta_E": values[s], "nodes": len(Z)})
    s_min = min(s_list)
    rep.constants = {"direct": direct, "smoothed": values}
    ok = True
    if direct is None:
        rep.notes.append("divisor mesh failed (singular X); direct comparison skipped")
    elif direct == 0.0:
        ok = all(v == 0.0 for v in values.values())
        rep.notes.append("h has no zeros: Theta_s vanishes identically")
    else:
        c = transverse_mass(spec, h, s_ref)
        err = abs(values[s_min] - c * direct) / (c * direct)
        c_naive = values[s_ref] / direct
        rep.constants.update({"c": c, "target": c * direct, "c_from_volume_at_s_ref": c_naive})
        rep.residuals = {"smoothed_rel": err,
                         "smoothed_rel_volume_c": abs(values[s_min] - c_naive * direct) / (c_naive * direct)}
        ok = err < th["blaschke_smooth_rel"]
        if direct_oracle is not None:
            rep.residuals["direct_rel"] = abs(direct - direct_oracle) / abs(direct_oracle)
            ok = ok and rep.residuals["direct_rel"] < th["blaschke_direct_rel"]
    rep.thresholds = {"blaschke_direct_rel": th["blaschke_direct_rel"],
                      "blaschke_smooth_rel": th["blaschke_smooth_rel"]}
    rep.passed = bool(ok)
    rep.runtimes = {"total_s": time.time() - t0}
    return rep
