"""Batch scenario runner: one verification pipeline per invocation, JSON report + CSV series.

    python -m lincvx.cli --domain BALL2 --pipeline lemma21 --out runs/
    python -m lincvx.cli --domain EGG24 --pipeline tau --param zeta=1,0 --param v=0,1 --param eps=1e-4
    python -m lincvx.cli --domain BALL2 --pipeline support-check --sweep M=1,2,4,8

Exit status: 0 pass, 1 threshold failure (report still written), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import domains, geometry, kernels, norms, solvers, support
from .poly import Poly
from .quadrature import QuadratureSpec
from .solvers import SolveReport, load_defaults

PIPELINES = ("tau", "basis", "pdist", "geometry-props", "norms", "support-check", "hefer", "k0-calib",
             "lemma21", "lemma25", "koppelman", "dbar-solve", "uniform-int", "l1-estimate", "d-solve",
             "current-compare", "blaschke")


class UsageError(ValueError):
    pass


@dataclass
class Scenario:
    id: str
    domain: str
    pipeline: str
    params: dict = field(default_factory=dict)
    grid: int = 0
    seed: int = 0


# ---------------------------------------------------------------- parameter parsing

def parse_value(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return text


def parse_point(v) -> np.ndarray:
    """'1,0' or '0.6,0.8j' or a list -> complex vector."""
    if isinstance(v, str):
        return np.array([complex(x.strip().replace("i", "j")) for x in v.split(",")])
    return np.atleast_1d(np.asarray(v, dtype=complex))


_TERM = re.compile(r"([+-]?)\s*([^+-]+)")


def parse_poly(text: str, n: int) -> Poly:
    """Holomorphic polynomial like 'z2', 'z1*z2 - 0.5', '2*z1^2+z2'."""
    terms = {}
    s = str(text).replace(" ", "")
    if not s:
        raise UsageError("empty polynomial")
    for sign, body in _TERM.findall(s):
        c = -1.0 if sign == "-" else 1.0
        a = [0] * n
        for f in body.split("*"):
            m = re.fullmatch(r"z(\d+)(?:\^(\d+))?", f)
            if m:
                i = int(m.group(1)) - 1
                if not 0 <= i < n:
                    raise UsageError(f"variable {f} out of range")
                a[i] += int(m.group(2) or 1)
            else:
                try:
                    c *= complex(f.replace("i", "j"))
                except ValueError as e:
                    raise UsageError(f"cannot parse factor {f!r}") from e
        key = (tuple(a), (0,) * n)
        terms[key] = terms.get(key, 0) + c
    return Poly(n, terms)


def _thresholds(params: dict) -> dict:
    th = dict(load_defaults()["thresholds"])
    for k in list(params):
        if k in th:
            th[k] = float(params[k])
    return th


# ---------------------------------------------------------------- pipelines

def _assembly(spec, params):
    d = load_defaults()
    sp = support.SupportParams(M=float(params.get("M", d["support"]["M"])), K=float(params.get("K", d["support"]["K"])),
                               eps=float(params.get("eps_supp", d["support"]["eps"])),
                               R=float(params.get("R", d["support"]["R"])), d=float(params.get("d", d["support"]["d"])))
    K0 = float(params.get("K0", d["K0"].get(spec.name, 3.0)))
    return kernels.KernelAssembly(spec, sp, K0=K0)


def _report(sc: Scenario, spec) -> SolveReport:
    return SolveReport(sc.id, sc.pipeline, spec.name, grid_levels=[sc.grid])


def p_tau(sc, spec, th):
    zeta = parse_point(sc.params.get("zeta", "1,0"))
    v = parse_point(sc.params.get("v", "0,1"))
    eps = float(sc.params.get("eps", 1e-4))
    v = v / np.linalg.norm(v)
    val = geometry.tau(spec, zeta, v, eps)
    rep = _report(sc, spec)
    rep.constants = {"tau": val, "zeta": solvers._zstr(zeta), "v": solvers._zstr(v), "eps": eps}
    if "expect" in sc.params:
        rel = abs(val - float(sc.params["expect"])) / abs(float(sc.params["expect"]))
        rep.residuals = {"relative_error": rel}
        rep.thresholds = {"tau_rel": float(sc.params.get("tau_rel", 1e-4))}
        rep.passed = rel <= rep.thresholds["tau_rel"]
    else:
        rep.passed = bool(np.isfinite(val))
    return rep


def p_basis(sc, spec, th):
    zeta = parse_point(sc.params.get("zeta", "1" + ",0" * (spec.n - 1)))
    eps = float(sc.params.get("eps", 1e-2))
    fr = geometry.extremal_basis(spec, zeta, eps, check_collar=False)
    rep = _report(sc, spec)
    rep.constants = {"vectors": [solvers._zstr(v) for v in fr.vectors], "radii": list(fr.radii), "eps": eps}
    rep.series = [{"index": j + 1, "vector": solvers._zstr(v), "tau": t} for j, (v, t) in enumerate(zip(fr.vectors, fr.radii))]
    rep.passed = bool(np.all(np.isfinite(fr.radii)))
    return rep


def p_pdist(sc, spec, th):
    rep = _report(sc, spec)
    if "zeta" in sc.params and "z" in sc.params:
        zeta, z = parse_point(sc.params["zeta"]), parse_point(sc.params["z"])
        a, capped = geometry.pseudodistance(spec, zeta, z, return_info=True)
        b = geometry.pseudodistance(spec, z, zeta)
        rep.constants = {"d_zeta_z": a, "d_z_zeta": b, "capped": capped}
        rep.passed = True
        return rep
    out = geometry.quasi_symmetry(spec, int(sc.params.get("count", 1000)), sc.seed)
    rep.constants = {"max_ratio": out["max_ratio"], "median_ratio": out["median_ratio"]}
    rep.series = out["rows"]
    rep.thresholds = {"quasi_symmetry_cap": th["quasi_symmetry_cap"]}
    rep.passed = out["max_ratio"] <= th["quasi_symmetry_cap"]
    return rep


def p_geometry(sc, spec, th):
    g = geometry.verify_geometry_properties(spec, int(sc.params.get("n_samples", 20)), sc.seed)
    rep = _report(sc, spec)
    worst = g.summary()
    rep.constants = {"worst": worst}
    rep.series = [{"property": pid, "zeta": geometry._fmt(z), "eps": e, "tau": t, "constant": c}
                  for pid, z, e, _, t, c in g.rows]
    # scaling exponents at a reference boundary point, over lambda in 2..64
    zeta = parse_point(sc.params.get("zeta", "1" + ",0" * (spec.n - 1)))
    eps = float(sc.params.get("eps", 1e-6 if spec.n > 2 else 1e-4))
    slopes, _ = geometry.exponent_fit(spec, zeta, eps)
    lo = 1.0 / spec.type_bound - th["exponent_slack"]
    hi = 0.5 + th["exponent_slack"]
    tang = [float(s) for s in slopes[1:]]
    rep.constants["tangent_exponents"] = tang
    rep.constants["literal_window_low"] = 1.0 / spec.m - th["exponent_slack"]
    rep.thresholds = {"geometry_cap": th["geometry_cap"], "exponent_low": lo, "exponent_high": hi}
    rep.passed = bool(max(worst.values()) <= th["geometry_cap"] and all(lo <= s <= hi for s in tang))
    return rep


def p_norms(sc, spec, th):
    z = parse_point(sc.params.get("z", "0.9" + ",0" * (spec.n - 1)))
    f = solvers.dbar_form(spec.n, {((0,) * spec.n, tuple(int(i == spec.n - 1) for i in range(spec.n))): 1.0})
    fast = float(norms.form_knorm(spec, f, z[None])[0])
    lit = norms.form_knorm_sup(spec, f, z, n_tuples=int(sc.params.get("n_tuples", 10_000)), seed=sc.seed)
    k, E, _ = norms.current_norms(spec, solvers.psh_current(spec.n), z[None])
    rep = _report(sc, spec)
    rep.constants = {"knorm_fast": fast, "knorm_sup": lit, "ratio": fast / lit,
                     "current_knorm": float(k[0]), "current_E": float(E[0])}
    rep.thresholds = {"geometry_cap": th["geometry_cap"]}
    r = fast / lit
    rep.passed = bool(1 / th["geometry_cap"] <= r <= th["geometry_cap"])
    return rep


def _support_params(sc):
    d = load_defaults()["support"]
    return support.SupportParams(M=float(sc.params.get("M", d["M"])), K=float(sc.params.get("K", d["K"])),
                                 eps=float(sc.params.get("eps", d["eps"])), R=float(sc.params.get("R", d["R"])),
                                 d=float(sc.params.get("d", d["d"])))


def p_support(sc, spec, th):
    params = _support_params(sc)
    le = support.verify_local_estimate(spec, params, int(sc.params.get("n_samples", 10_000)), sc.seed)
    rng = np.random.default_rng(sc.seed)
    zb = domains.sample_boundary(spec, 100, rng)
    zeta = zb - 0.01 * rng.uniform(size=(len(zb), 1)) * domains.complex_normal(spec, zb)
    s0 = float(np.abs(support.Support(spec, params)(zeta, zeta)).max())
    rep = _report(sc, spec)
    rep.constants = {k: v for k, v in le.to_dict().items() if k not in ("extra",)}
    rep.residuals = {"S0_diagonal": s0}
    rep.thresholds = {"support_zero_tol": th["support_zero_tol"]}
    rep.passed = bool(le.passed and s0 <= th["support_zero_tol"])
    return rep


def hefer_residual(spec, params, count: int = 1000, seed: int = 0) -> float:
    """max |S0(z, zeta) - sum Q_i (z_i - zeta_i)| / max(1, |S0|) over collar pairs."""
    rng = np.random.default_rng(seed)
    z, zeta = kernels.collar_pairs(spec, count, rng, params.R, spec.eta0)
    sup = support.Support(spec, params)
    S = sup(z, zeta)
    Q = support.hefer_q(sup, z, zeta)
    return float((np.abs(S - (Q * (z - zeta)).sum(-1)) / np.maximum(1.0, np.abs(S))).max())


def p_hefer(sc, spec, th):
    res = hefer_residual(spec, _support_params(sc), int(sc.params.get("count", 1000)), sc.seed)
    rep = _report(sc, spec)
    rep.residuals = {"hefer": res}
    rep.thresholds = {"hefer_tol": th["hefer_tol"]}
    rep.passed = res < th["hefer_tol"]
    return rep


def p_k0(sc, spec, th):
    asm = _assembly(spec, sc.params)
    K0, info = kernels.calibrate_K0(asm, int(sc.params.get("n_samples", 10_000)), sc.seed)
    rep = _report(sc, spec)
    rep.constants = info
    rep.passed = info["violations"] == 0
    return rep


def p_lemma21(sc, spec, th):
    asm = _assembly(spec, sc.params)
    out = kernels.verify_lemma21(asm, seed=sc.seed, c_min=th["lemma21_c_min"],
                                 n_samples=int(sc.params.get("n_samples", 400)))
    rep = _report(sc, spec)
    rep.constants = {"min_ratio": out["min_ratio"]}
    rep.series = out["rows"]
    rep.thresholds = {"lemma21_c_min": th["lemma21_c_min"]}
    rep.passed = out["passed"]
    return rep


def p_lemma25(sc, spec, th):
    asm = _assembly(spec, sc.params)
    out = kernels.verify_lemma25(asm, seed=sc.seed, threshold=th["lemma25_cap"])
    rep = _report(sc, spec)
    rep.constants = {k: out[k] for k in ("drho", "Q", "dQ")}
    rep.thresholds = {"lemma25_cap": th["lemma25_cap"]}
    rep.passed = out["passed"]
    return rep


KOPPELMAN_PROBES = np.array([[0.3, 0.2], [0.6, 0.1j], [-0.2 + 0.5j, 0.3], [0.1, -0.7], [0.45j, -0.55]])


def _need_n2(spec):
    if spec.n != 2:
        raise UsageError("this pipeline is implemented for n = 2 domains")


def p_koppelman(sc, spec, th):
    _need_n2(spec)
    asm = _assembly(spec, sc.params)
    f = solvers.dbar_family(2)[0][1]
    levels = [sc.grid, sc.grid + 1] if sc.params.get("refine", False) else [sc.grid]
    reps = [solvers.koppelman_check(asm, f, KOPPELMAN_PROBES, QuadratureSpec(spec, lv)) for lv in levels]
    rep = reps[-1]
    rep.scenario, rep.pipeline, rep.grid_levels = sc.id, sc.pipeline, levels
    if len(reps) > 1:
        a, b = reps[0].residuals["max_relative"], reps[1].residuals["max_relative"]
        rep.residuals["coarse_max_relative"] = a
        rep.residuals["refinement_ratio"] = b / a
        rep.passed = bool(rep.passed and b <= 0.5 * a)
    return rep


def p_dbar(sc, spec, th):
    _need_n2(spec)
    asm = _assembly(spec, sc.params)
    quads = [QuadratureSpec(spec, sc.grid), QuadratureSpec(spec, sc.grid + 1)]
    rep = solvers.dbar_pipeline(asm, solvers.dbar_family(2), KOPPELMAN_PROBES, quads)
    rep.scenario = sc.id
    return rep


def p_uniform(sc, spec, th):
    _need_n2(spec)
    asm = _assembly(spec, sc.params)
    anchors = solvers.default_anchors(spec)
    eps_list = sc.params.get("eps_list")
    kw = {"eps_list": tuple(float(e) for e in eps_list)} if eps_list else {}
    rep = solvers.uniform_integrability(asm, anchors, seed=sc.seed, **kw)
    rep.scenario = sc.id
    return rep


def p_l1(sc, spec, th):
    _need_n2(spec)
    asm = _assembly(spec, sc.params)
    fam = [x for x in solvers.dbar_family(2)[:3]]
    rep = solvers.l1_boundary_estimate(asm, fam, [QuadratureSpec(spec, sc.grid), QuadratureSpec(spec, sc.grid + 1)])
    rep.scenario = sc.id
    return rep


def _theta(sc, spec):
    kind = sc.params.get("theta", "psh")
    if kind == "coordinate":
        return solvers.coordinate_current(spec.n)
    if kind == "random":
        return solvers.random_psh_current(spec.n, int(sc.params.get("degree", 3)), 2, sc.seed)
    if kind == "psh":
        return solvers.psh_current(spec.n)
    raise UsageError(f"unknown theta {kind!r} (coordinate|random|psh)")


def p_dsolve(sc, spec, th):
    _need_n2(spec)
    rep = solvers.d_norm_estimate(spec, _theta(sc, spec), QuadratureSpec(spec, sc.grid), seed=sc.seed)
    rep.scenario = sc.id
    return rep


def p_current(sc, spec, th):
    _need_n2(spec)
    if "h" in sc.params:
        h = parse_poly(sc.params["h"], spec.n)
        s = float(sc.params.get("s", 0.1))
        theta = solvers.divisor_current(h, s)
        grids = [solvers.divisor_grid(spec, h, s, lv) for lv in (sc.grid, sc.grid + 1)]
    else:
        theta = _theta(sc, spec)
        grids = [QuadratureSpec(spec, lv).volume() for lv in (sc.grid, sc.grid + 1)]
    rep = solvers.current_norm_comparison(spec, theta, grids)
    rep.scenario = sc.id
    return rep


def p_blaschke(sc, spec, th):
    _need_n2(spec)
    h = parse_poly(sc.params.get("h", "z2"), spec.n)
    s_list = tuple(float(s) for s in sc.params.get("s_list", [0.2, 0.1, 0.05]))
    oracle = sc.params.get("direct_oracle")
    rep = solvers.blaschke_check(spec, h, s_list, level=max(sc.grid, 1),
                                 direct_oracle=None if oracle is None else float(oracle))
    rep.scenario = sc.id
    return rep


DISPATCH = {"tau": p_tau, "basis": p_basis, "pdist": p_pdist, "geometry-props": p_geometry, "norms": p_norms,
            "support-check": p_support, "hefer": p_hefer, "k0-calib": p_k0, "lemma21": p_lemma21,
            "lemma25": p_lemma25, "koppelman": p_koppelman, "dbar-solve": p_dbar, "uniform-int": p_uniform,
            "l1-estimate": p_l1, "d-solve": p_dsolve, "current-compare": p_current, "blaschke": p_blaschke}


# ---------------------------------------------------------------- run / sweep

def resolve_domain(name: str):
    try:
        return domains.get_domain(name)
    except (KeyError, FileNotFoundError, ValueError) as e:
        raise UsageError(f"unknown domain {name!r}") from e


def run(sc: Scenario, out_dir=None) -> SolveReport:
    if sc.pipeline not in DISPATCH:
        raise UsageError(f"unknown pipeline {sc.pipeline!r}")
    spec = resolve_domain(sc.domain)
    th = _thresholds(sc.params)
    t0 = time.time()
    rep = DISPATCH[sc.pipeline](sc, spec, th)
    rep.scenario = sc.id
    rep.pipeline = sc.pipeline
    rep.domain = spec.name
    rep.runtimes.setdefault("total_s", time.time() - t0)
    rep.notes.append(f"seed={sc.seed} params={json.dumps(sc.params, sort_keys=True, default=str)}")
    if not rep.thresholds:
        rep.thresholds = {}
    rep.thresholds = {**rep.thresholds, "defaults": th}
    if out_dir is not None:
        rep.write(out_dir)
    return rep


def sweep(base: Scenario, axis: str, values: list, out_dir=None) -> list[SolveReport]:
    if not values:
        raise UsageError("sweep needs at least one value")
    reps = []
    for v in values:
        sc = Scenario(f"{base.id}-{axis}={v}", base.domain, base.pipeline, {**base.params, axis: v},
                      base.grid, base.seed)
        reps.append(run(sc, out_dir))
    if out_dir is not None:
        table = SolveReport(f"{base.id}-sweep-{axis}", base.pipeline, base.domain)
        table.series = [{axis: v, "passed": r.passed, **{k: c for k, c in r.constants.items()
                                                       if isinstance(c, (int, float, bool))}}
                        for v, r in zip(values, reps)]
        table.passed = all(r.passed for r in reps)
        table.write(out_dir)
    return reps


def load_scenario(path) -> Scenario:
    """Scenario file: JSON object with keys id, domain, pipeline, params, grid, seed."""
    d = json.loads(Path(path).read_text())
    return Scenario(d.get("id") or f"{d['domain']}-{d['pipeline']}", d["domain"], d["pipeline"],
                    d.get("params", {}), int(d.get("grid", 0)), int(d.get("seed", 0)))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lincvx", description="Run a verification pipeline on a model domain.")
    ap.add_argument("--domain", help="catalog name (BALL2, EGG24, EGG226, TUBE4, NONCONVEX_TEST) or spec file")
    ap.add_argument("--pipeline", choices=PIPELINES)
    ap.add_argument("--param", action="append", default=[], metavar="K=V", help="pipeline parameter (repeatable)")
    ap.add_argument("--grid", type=int, default=0, metavar="L", help="quadrature level")
    ap.add_argument("--seed", type=int, default=0, metavar="N")
    ap.add_argument("--out", default="runs", metavar="DIR")
    ap.add_argument("--sweep", metavar="AXIS=V1,V2,...")
    ap.add_argument("--id", help="scenario id (default <domain>-<pipeline>)")
    ap.add_argument("--scenario", metavar="FILE", help="scenario JSON file (flags override)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        if args.scenario:
            sc = load_scenario(args.scenario)
        else:
            if not args.domain or not args.pipeline:
                raise UsageError("--domain and --pipeline are required")
            sc = Scenario("", args.domain, args.pipeline, {}, args.grid, args.seed)
        if args.domain:
            sc.domain = args.domain
        if args.pipeline:
            sc.pipeline = args.pipeline
        if args.grid:
            sc.grid = args.grid
        if args.seed:
            sc.seed = args.seed
        for kv in args.param:
            if "=" not in kv:
                raise UsageError(f"--param expects K=V, got {kv!r}")
            k, v = kv.split("=", 1)
            sc.params[k] = parse_value(v)
        sc.id = args.id or sc.id or f"{sc.domain}-{sc.pipeline}"
        resolve_domain(sc.domain)
        if args.sweep:
            if "=" not in args.sweep:
                raise UsageError("--sweep expects AXIS=V1,V2,...")
            axis, vals = args.sweep.split("=", 1)
            values = [parse_value(v) for v in vals.split(",") if v != ""]
            reps = sweep(sc, axis, values, args.out)
            for r in reps:
                print(f"{r.scenario}: {'PASS' if r.passed else 'FAIL'}")
            return 0 if all(r.passed for r in reps) else 1
        rep = run(sc, args.out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    print(f"{rep.scenario}: {'PASS' if rep.passed else 'FAIL'}")
    print(json.dumps({"constants": rep.to_dict()["constants"], "thresholds": rep.to_dict()["thresholds"]},
                     indent=2, default=str)[:4000])
    return 0 if rep.passed else 1


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
