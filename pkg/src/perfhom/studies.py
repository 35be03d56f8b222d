"""Config-driven sweeps: records, rate fits and pass/fail verdicts.

A config file is INI text (``configparser``) with one ``[study:NAME]``
section per study.  Keys (lists are comma separated):

    kind        one of STUDY_KINDS
    holes       hole specs, e.g. ``circle:0.25, ellipse:0.3,0.2``
    lambda, mu  Lame parameters
    etas        hole-cell ratios
    epsilons    cell sizes
    grids       finite-difference grid sizes
    nodes       boundary node counts
    scales      curve scale factors (capacity studies)
    densities   number of random trigonometric densities
    regimes     regimes swept by ``rates`` studies
    eta_law.R   eta law for regime R, e.g. ``eta_law.super = fixed:0.25``
    tol.NAME    tolerance attached to record column or check NAME
    opt.NAME    kind-specific option
    seed        seed for density sampling
    workers     worker processes (1 = in-process)
    output      output directory
    mandatory   whether the study's checks decide the exit status

Records go to ``OUTPUT/NAME.csv`` (schema header ``# perfhom-record-v1``)
one row per point, appended and flushed as points finish.  A JSON
sidecar ``OUTPUT/NAME.json`` echoes the config and holds the environment
stamp, wall times, fits and checks; wall times stay out of the CSV so
reruns compare equal.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import platform
import re
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from .bie import assemble, kernel_basis, verify_jumps
from .cell import (cell_average, effective_matrix, l2_distance, oscillating_field,
                   parse_eta_law, sigma, solve_cell)
from .geometry import LameParams, build_perforation, panelize, parse_hole
from .homogenize import (GridField, bump, discrepancy, grid_cell_field, oscillating_test_identity,
                         poincare_ratio, solve_effective, solve_perforated, weak_limit_metric)
from .rates import RateFit, fit_rate

__all__ = ["StudyConfig", "StudyRecord", "StudyResult", "Check", "fit_rate", "RateFit", "load_config",
           "dump_config", "default_config_path", "run_study", "run_config", "read_records", "STUDY_KINDS"]

SCHEMA = "# perfhom-record-v1"
STUDY_KINDS = ("kernel_identity", "jump_relations", "capacity", "cell_limit", "oracle_structure", "rates",
               "determinism")

# hole specs carry commas ("ellipse:0.3,0.2"); string lists split before a letter
_STR_SEP = r",\s*(?=[A-Za-z])"
_LIST_KEYS = {"holes": str, "etas": float, "epsilons": float, "grids": int, "nodes": int, "scales": float,
              "regimes": str}


class StudyError(ValueError):
    """Invalid study configuration."""


@dataclass(frozen=True)
class StudyConfig:
    name: str
    kind: str
    holes: tuple = ("circle:0.25",)
    lam: float = 1.0
    mu: float = 1.0
    etas: tuple = ()
    epsilons: tuple = ()
    grids: tuple = ()
    nodes: tuple = (256,)
    scales: tuple = ()
    densities: int = 5
    regimes: tuple = ()
    eta_laws: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output: str = "perfhom-out"
    mandatory: bool = True

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise StudyError(f"unknown study kind {self.kind!r}")
        if self.workers < 1:
            raise StudyError("workers must be >= 1")
        for r in self.regimes:
            if r not in self.eta_laws:
                raise StudyError(f"regime {r!r} has no eta_law.{r} entry")
        for law in self.eta_laws.values():
            parse_eta_law(law)
        if any(n < 32 or n % 2 for n in self.nodes):
            raise StudyError("node counts must be even and >= 32")
        if self.kind in ("oracle_structure", "rates") and not self.epsilons:
            raise StudyError("epsilon list is empty")
        if self.kind in ("kernel_identity", "cell_limit") and not self.etas:
            raise StudyError("eta list is empty")
        if self.kind == "capacity" and 1.0 not in self.scales:
            raise StudyError("capacity studies need scale 1 as the reference")

    @property
    def params(self) -> LameParams:
        return LameParams(self.lam, self.mu)

    def tol(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def opt(self, key: str, default):
        v = self.options.get(key)
        return default if v is None else type(default)(v)


@dataclass(frozen=True)
class StudyRecord:
    index: int
    point: dict
    values: dict
    status: str = "ok"
    message: str = ""


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    target: str
    passed: bool
    mandatory: bool = True

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} (target {self.target})"


@dataclass
class StudyResult:
    config: StudyConfig
    records: list
    fits: dict
    checks: list
    wall_times: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)


# ---------------------------------------------------------------------------
# config serialization


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _section(cfg: StudyConfig) -> dict:
    out = {"kind": cfg.kind, "lambda": _fmt(float(cfg.lam)), "mu": _fmt(float(cfg.mu))}
    for key in _LIST_KEYS:
        vals = getattr(cfg, key)
        if vals:
            out[key] = ", ".join(_fmt(v) for v in vals)
    out["densities"] = str(cfg.densities)
    for r, law in cfg.eta_laws.items():
        out[f"eta_law.{r}"] = law
    for k, v in cfg.tolerances.items():
        out[f"tol.{k}"] = _fmt(float(v))
    for k, v in cfg.options.items():
        out[f"opt.{k}"] = str(v)
    out["seed"] = str(cfg.seed)
    out["workers"] = str(cfg.workers)
    out["output"] = cfg.output
    out["mandatory"] = _fmt(cfg.mandatory)
    return out


def dump_config(configs) -> str:
    """INI text for a list of configs; ``load_config`` inverts it exactly."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for cfg in configs:
        cp[f"study:{cfg.name}"] = _section(cfg)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def _from_section(name: str, sec) -> StudyConfig:
    kw: dict = {"name": name, "eta_laws": {}, "tolerances": {}, "options": {}}
    known = {"kind", "lambda", "mu", "densities", "seed", "workers", "output", "mandatory"} | set(_LIST_KEYS)
    for key, raw in sec.items():
        if key.startswith("eta_law."):
            kw["eta_laws"][key[8:]] = raw.strip()
        elif key.startswith("tol."):
            kw["tolerances"][key[4:]] = float(raw)
        elif key.startswith("opt."):
            kw["options"][key[4:]] = raw.strip()
        elif key not in known:
            raise StudyError(f"[study:{name}] unknown key {key!r}")
    try:
        kw["kind"] = sec["kind"].strip()
    except KeyError as exc:
        raise StudyError(f"[study:{name}] missing kind") from exc
    kw["lam"] = float(sec.get("lambda", "1.0"))
    kw["mu"] = float(sec.get("mu", "1.0"))
    for key, typ in _LIST_KEYS.items():
        if key in sec:
            sep = _STR_SEP if typ is str else ","
            items = [s.strip() for s in re.split(sep, sec[key]) if s.strip()]
            kw[key] = tuple(typ(s) for s in items)
    kw["densities"] = int(sec.get("densities", "5"))
    kw["seed"] = int(sec.get("seed", "0"))
    kw["workers"] = int(sec.get("workers", "1"))
    kw["output"] = sec.get("output", "perfhom-out").strip()
    kw["mandatory"] = sec.getboolean("mandatory", fallback=True)
    return StudyConfig(**kw)


def load_config(path_or_text) -> list:
    """Parse a config file (path) or INI text into StudyConfig objects, in file order."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    text = str(path_or_text)
    if "\n" in text or "[" in text:
        cp.read_string(text)
    else:
        with open(text) as fh:
            cp.read_file(fh)
    out = []
    for sec in cp.sections():
        if not sec.startswith("study:"):
            raise StudyError(f"unexpected section [{sec}]")
        out.append(_from_section(sec[6:], cp[sec]))
    if not out:
        raise StudyError("config defines no studies")
    return out


def default_config_path() -> Path:
    return Path(str(resources.files("perfhom") / "data" / "default.cfg"))


# ---------------------------------------------------------------------------
# study kinds: points, record columns, evaluation


def _sine_load(x):
    s1, s2 = np.sin(np.pi * x[..., 0]), np.sin(np.pi * x[..., 1])
    return np.stack([s1 * s2, 0.5 * s1 * np.sin(2 * np.pi * x[..., 1])], -1)


LOADS = {"sine": _sine_load}

_COLUMNS = {
    "kernel_identity": (("hole", "eta", "nodes"), ("constancy_residual", "periodic_residual")),
    "jump_relations": (("hole", "density", "nodes"),
                       ("continuity", "conormal_jump", "double_jump", "double_sign")),
    "capacity": (("hole", "nodes", "scale"),
                 ("a11", "a12", "a21", "a22", "symmetry", "sv_kernel", "sv_gap", "rescale")),
    "cell_limit": (("hole", "eta", "nodes"), ("avg11", "avg22", "average_error", "l2_distance")),
    "oracle_structure": (("hole", "epsilon", "eta", "grid"),
                         ("sigma", "energy_residual", "poincare", "apriori", "identity")),
    "rates": (("hole", "regime", "epsilon", "eta", "grid"),
              ("sigma", "zeta_l2", "zeta_h1", "zeta_grad", "weak_metric", "bound")),
    "determinism": (("target", "workers"), ("max_difference", "rows")),
}


def _points(cfg: StudyConfig) -> list:
    k = cfg.kind
    n0 = cfg.nodes[0]
    if k == "kernel_identity":
        return [{"hole": h, "eta": e, "nodes": n0} for h in cfg.holes for e in cfg.etas]
    if k == "jump_relations":
        return [{"hole": h, "density": d, "nodes": n0} for h in cfg.holes for d in range(cfg.densities)]
    if k == "capacity":
        return [{"hole": h, "nodes": n, "scale": s} for h in cfg.holes for n in cfg.nodes for s in cfg.scales]
    if k == "cell_limit":
        return [{"hole": h, "eta": e, "nodes": n0} for h in cfg.holes for e in cfg.etas]
    if k == "oracle_structure":
        g = cfg.grids[-1]
        pts = [{"hole": h, "epsilon": e, "eta": t, "grid": g}
               for h in cfg.holes for e in cfg.epsilons for t in cfg.etas]
        pe, pt = cfg.opt("probe_epsilon", cfg.epsilons[-1]), cfg.opt("probe_eta", cfg.etas[-1])
        pts += [{"hole": cfg.holes[0], "epsilon": pe, "eta": pt, "grid": gg} for gg in cfg.grids[:-1]]
        return pts
    if k == "rates":
        pts = []
        for r in cfg.regimes:
            law = parse_eta_law(cfg.eta_laws[r])
            for e in cfg.epsilons:
                pts.append({"hole": cfg.holes[0], "regime": r, "epsilon": e, "eta": law(e), "grid": cfg.grids[0]})
        return pts
    if k == "determinism":
        return [{"target": cfg.options.get("target", ""), "workers": w}
                for w in (int(s) for s in cfg.options.get("workers", "1, 2").split(","))]
    raise StudyError(k)


def _trig_density(pan, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng([seed, index])
    m = rng.integers(1, 6, size=2)
    amp = rng.uniform(0.5, 1.5, size=2)
    ph = rng.uniform(0, 2 * np.pi, size=2)
    t = pan.theta
    return np.stack([amp[0] * np.cos(m[0] * t + ph[0]), amp[1] * np.sin(m[1] * t + ph[1])], -1)


@lru_cache(maxsize=8)
def _cell(hole: str, eta: float, lam: float, mu: float, nodes: int):
    return solve_cell(parse_hole(hole), eta, LameParams(lam, mu), n_nodes=nodes)


def _eval_kernel_identity(cfg, p):
    curve = parse_hole(p["hole"])
    pan = panelize(curve, p["nodes"])
    n = pan.n
    E = np.zeros((2 * n, 2))
    E[0::2, 0] = 1.0
    E[1::2, 1] = 1.0
    K = assemble(pan, "K", cfg.params).matrix
    Ke = assemble(pan, "K_eta", cfg.params, eta=p["eta"]).matrix
    free = np.abs(K @ E - 0.5 * E).max()
    per = np.abs(Ke @ E - 0.5 * E + p["eta"] ** 2 * curve.area * E).max()
    return {"constancy_residual": free, "periodic_residual": per}


def _eval_jump_relations(cfg, p):
    pan = panelize(parse_hole(p["hole"]), p["nodes"])
    rep = verify_jumps(pan, _trig_density(pan, cfg.seed, p["density"]), cfg.params)
    return {"continuity": rep.continuity, "conormal_jump": rep.conormal_jump,
            "double_jump": rep.double_jump, "double_sign": float(rep.double_sign)}


def _eval_capacity(cfg, p):
    curve = parse_hole(p["hole"])
    if p["scale"] != 1.0:
        curve = curve.scaled(p["scale"])
    kb = kernel_basis(panelize(curve, p["nodes"]), cfg.params)
    A = kb.A_T
    return {"a11": A[0, 0], "a12": A[0, 1], "a21": A[1, 0], "a22": A[1, 1], "symmetry": abs(A[0, 1] - A[1, 0]),
            "sv_kernel": kb.singular_values[1], "sv_gap": kb.singular_values[2], "rescale": kb.rescale}


def _eval_cell_limit(cfg, p):
    sol = _cell(p["hole"], p["eta"], cfg.lam, cfg.mu, p["nodes"])
    avg = cell_average(sol) / sol.log_factor
    lim = cfg.params.c1 / (2 * np.pi) * np.eye(2)
    return {"avg11": avg[0, 0], "avg22": avg[1, 1], "average_error": np.linalg.norm(avg - lim, axis=0).max(),
            "l2_distance": l2_distance(sol).max()}


def _eval_oracle_structure(cfg, p):
    curve = parse_hole(p["hole"])
    eps, eta, n = p["epsilon"], p["eta"], p["grid"]
    f = LOADS[cfg.opt("load", "sine")]
    s = sigma(eps, eta).sigma
    u = solve_perforated(build_perforation(eps, eta, curve), f, cfg.params, n)
    fnorm = GridField(n, f(_nodes(n)), np.zeros((n + 1, n + 1), np.uint8)).l2_norm()
    v = grid_cell_field(eps, eta, curve, cfg.params, n, s)
    phi = bump(n, (cfg.opt("bump_x", 0.47), cfg.opt("bump_y", 0.55)), cfg.opt("bump_radius", 0.35))
    ident = max(oscillating_test_identity(u, v[..., k], f, phi, s, cfg.params, k).residual for k in range(2))
    return {"sigma": s, "energy_residual": u.info["energy_residual"], "poincare": poincare_ratio(u, s),
            "apriori": u.l2_norm() / (s ** 2 * fnorm), "identity": ident}


def _nodes(n):
    s = np.arange(n + 1) / n
    return np.stack(np.meshgrid(s, s, indexing="ij"), -1)


def _eval_rates(cfg, p):
    curve = parse_hole(p["hole"])
    eps, eta, n, regime = p["epsilon"], p["eta"], p["grid"], p["regime"]
    f = LOADS[cfg.opt("load", "sine")]
    s = sigma(eps, eta).sigma
    perf = build_perforation(eps, eta, curve)
    u = solve_perforated(perf, f, cfg.params, n)
    sol = _cell(p["hole"], eta, cfg.lam, cfg.mu, cfg.nodes[0])
    v = oscillating_field(sol, eps).on_grid(n)
    if regime == "super":
        M = effective_matrix("classical", cfg.params, sol).M
        ue = solve_effective("super", M, None, f, cfg.params, n)
        z = discrepancy("super", u, f, v, M, s)
        w = GridField(n, u.values / s ** 2, u.mask)
        bound = s + abs(np.log(eta)) ** -0.5
    elif regime == "sub":
        M = effective_matrix("dilute_2d", cfg.params).M
        ue = solve_effective("sub", M, None, f, cfg.params, n)
        z = discrepancy("sub", u, ue, v, M, s)
        w = u
        bound = s ** -2 + abs(np.log(eta)) ** -0.5
    else:
        raise StudyError(f"rates studies cover 'super' and 'sub', not {regime!r}")
    weak = weak_limit_metric(w, ue, cfg.opt("window", 2.0) * eps, eps)
    return {"sigma": s, "zeta_l2": z.l2, "zeta_h1": math.hypot(z.l2, z.h1), "zeta_grad": z.h1,
            "weak_metric": weak, "bound": bound}


def _eval_determinism(cfg, p, siblings):
    target = siblings.get(p["target"])
    if target is None:
        raise StudyError(f"determinism target {p['target']!r} is not defined in the config")
    with tempfile.TemporaryDirectory() as tmp:
        a = run_study(replace(target, workers=1, output=os.path.join(tmp, "a")), write=True)
        b = run_study(replace(target, workers=p["workers"], output=os.path.join(tmp, "b")), write=True)
        ra = read_records(os.path.join(tmp, "a", f"{target.name}.csv"))
        rb = read_records(os.path.join(tmp, "b", f"{target.name}.csv"))
    del a, b
    return {"max_difference": _record_difference(ra, rb), "rows": float(len(ra))}


def _record_difference(ra, rb) -> float:
    if len(ra) != len(rb):
        return math.inf
    worst = 0.0
    for x, y in zip(ra, rb):
        if x.keys() != y.keys():
            return math.inf
        for k in x:
            if isinstance(x[k], float) and isinstance(y[k], float):
                if math.isnan(x[k]) and math.isnan(y[k]):
                    continue
                worst = max(worst, abs(x[k] - y[k]))
            elif x[k] != y[k]:
                return math.inf
    return worst


_EVAL = {"kernel_identity": _eval_kernel_identity, "jump_relations": _eval_jump_relations,
         "capacity": _eval_capacity, "cell_limit": _eval_cell_limit,
         "oracle_structure": _eval_oracle_structure, "rates": _eval_rates}


def _evaluate(cfg: StudyConfig, index: int, point: dict):
    t = time.perf_counter()
    try:
        vals = {k: float(v) for k, v in _EVAL[cfg.kind](cfg, point).items()}
        rec = StudyRecord(index, point, vals)
    except Exception as exc:  # recorded per point; the sweep continues
        rec = StudyRecord(index, point, {}, "error", f"{type(exc).__name__}: {exc}")
    return rec, time.perf_counter() - t


# ---------------------------------------------------------------------------
# checks and fits


def _ok(records):
    return [r for r in records if r.status == "ok"]


def _max_check(name, records, col, tol, mandatory=True):
    vals = [r.values[col] for r in records if r.status == "ok"]
    complete = len(vals) == len(records) and vals
    v = max(vals) if vals else math.inf
    return Check(name, v, f"<= {tol:g} at all {len(records)} points", bool(complete and v <= tol), mandatory)


def _errors_check(records):
    bad = [r for r in records if r.status != "ok"]
    return Check("points without errors", float(len(records) - len(bad)), f"{len(records)} of {len(records)}",
                 not bad)


def _finalize(cfg: StudyConfig, records: list):
    fits: dict = {}
    checks = [_errors_check(records)]
    k = cfg.kind
    if k == "kernel_identity":
        checks.append(_max_check("||K[e_j] - e_j/2||", records, "constancy_residual",
                                 cfg.tol("constancy_residual", 1e-8)))
        checks.append(_max_check("||(-I/2 + K_eta)[e_l] + eta^2|T| e_l||", records, "periodic_residual",
                                 cfg.tol("periodic_residual", 1e-7)))
    elif k == "jump_relations":
        tol = cfg.tol("jump", 1e-6)
        for col in ("continuity", "conormal_jump", "double_jump"):
            checks.append(_max_check(col, records, col, tol))
        signs = sorted({r.values["double_sign"] for r in _ok(records)})
        one = len(signs) == 1
        checks.append(Check("double-layer jump sign (interior minus exterior)", signs[0] if one else math.nan,
                            "one sign for all densities", one))
    elif k == "capacity":
        checks += _capacity_checks(cfg, records)
    elif k == "cell_limit":
        checks += _cell_limit_checks(cfg, records, fits)
    elif k == "oracle_structure":
        checks += _oracle_checks(cfg, records)
    elif k == "rates":
        checks += _rates_checks(cfg, records, fits)
    elif k == "determinism":
        checks.append(_max_check("record difference across reruns", records, "max_difference",
                                 cfg.tol("max_difference", 1e-10)))
    return fits, checks


def _capacity_checks(cfg, records):
    out = [_max_check("A_T symmetry", records, "symmetry", cfg.tol("symmetry", 1e-8)),
           _max_check("kernel singular value", records, "sv_kernel", cfg.tol("sv_kernel", 1e-8))]
    gaps = [r.values["sv_gap"] for r in _ok(records)]
    gmin = min(gaps) if gaps else 0.0
    out.append(Check("singular-value gap", gmin, f">= {cfg.tol('sv_gap', 1e-3):g}", gmin >= cfg.tol("sv_gap", 1e-3)))
    ok = {(r.point["hole"], r.point["nodes"], r.point["scale"]): r.values for r in _ok(records)}
    c = cfg.params.c1 / (2 * np.pi)
    tol = cfg.tol("scaling", 1e-6)
    nmax, nmin = max(cfg.nodes), min(cfg.nodes)
    for h in cfg.holes:
        ref = ok.get((h, nmax, 1.0))
        for s in cfg.scales:
            if s == 1.0:
                continue
            cur = ok.get((h, nmax, s))
            if ref is None or cur is None:
                out.append(Check(f"scaling law {h} r={s:g}", math.inf, f"<= {tol:g}", False))
                continue
            d = _mat(cur) - _mat(ref)
            stated = np.abs(d - c * np.log(s) * np.eye(2)).max()
            negated = np.abs(d + c * np.log(s) * np.eye(2)).max()
            out.append(Check(f"scaling law A_rT - A_T = +(c1/2pi) log r I, {h} r={s:g}", stated, f"<= {tol:g}",
                             stated <= tol))
            out.append(Check(f"scaling law A_rT - A_T = -(c1/2pi) log r I, {h} r={s:g}", negated, f"<= {tol:g}",
                             negated <= tol, mandatory=False))
        if nmax != nmin:
            a, b = ok.get((h, nmin, 1.0)), ok.get((h, nmax, 1.0))
            v = np.abs(_mat(a) - _mat(b)).max() if a and b else math.inf
            rt = cfg.tol("refinement", 1e-6)
            out.append(Check(f"refinement {nmin}->{nmax} {h}", v, f"<= {rt:g}", v <= rt))
    return out


def _mat(v):
    return np.array([[v["a11"], v["a12"]], [v["a21"], v["a22"]]])


def _exponent_check(name, fit, target, tol, r2_min=None):
    ok = abs(fit.exponent - target) <= tol and (r2_min is None or fit.r2 >= r2_min)
    tgt = f"{target:g} +/- {tol:g}" + (f", R^2 >= {r2_min:g}" if r2_min is not None else "")
    return Check(f"{name} (R^2 = {fit.r2:.6f})", fit.exponent, tgt, ok)


def _cell_limit_checks(cfg, records, fits):
    out = []
    for h in cfg.holes:
        rs = [r for r in records if r.point["hole"] == h]
        if any(r.status != "ok" for r in rs) or len(rs) < 3:
            out.append(Check(f"cell-limit fits {h}", math.nan, "all points solved", False))
            continue
        etas = [r.point["eta"] for r in rs]
        fa = fit_rate(etas, [r.values["average_error"] for r in rs], law="log")
        fl = fit_rate(etas, [r.values["l2_distance"] for r in rs], law="log")
        fits[f"average_error:{h}"] = fa
        fits[f"l2_distance:{h}"] = fl
        out.append(_exponent_check(f"|<v_k> - (c1/2pi) e_k| ~ |log eta|^-p, {h}", fa,
                                   cfg.tol("average_exponent", 1.0), cfg.tol("average_exponent_tol", 0.25),
                                   cfg.tol("r2", 0.98)))
        out.append(_exponent_check(f"||v_k - (c1/2pi) e_k||_L2 ~ |log eta|^-p, {h}", fl,
                                   cfg.tol("l2_exponent", 0.5), cfg.tol("l2_exponent_tol", 0.15)))
    return out


def _oracle_checks(cfg, records):
    g = cfg.grids[-1]
    main = [r for r in records if r.point["grid"] == g and
            (r.point["epsilon"], r.point["eta"]) in {(e, t) for e in cfg.epsilons for t in cfg.etas}]
    out = [_max_check("energy identity", records, "energy_residual", cfg.tol("energy_residual", 1e-6))]
    pr = [r.values["poincare"] for r in _ok(main)]
    spread = max(pr) / min(pr) if pr and len(pr) == len(main) else math.inf
    out.append(Check("Poincare ratio spread max/min", spread, f"<= {cfg.tol('poincare_spread', 2.0):g}",
                     spread <= cfg.tol("poincare_spread", 2.0)))
    pe, pt = cfg.opt("probe_epsilon", cfg.epsilons[-1]), cfg.opt("probe_eta", cfg.etas[-1])
    probe = sorted((r for r in records if r.point["epsilon"] == pe and r.point["eta"] == pt),
                   key=lambda r: r.point["grid"])
    fine = probe[-1] if probe else None
    tol = cfg.tol("identity", 1e-3)
    v = fine.values["identity"] if fine is not None and fine.status == "ok" else math.inf
    out.append(Check(f"oscillating-test identity at grid {g}", v, f"<= {tol:g}", v <= tol))
    seq = [r.values.get("identity", math.inf) for r in probe]
    dec = len(seq) >= 2 and all(b < a for a, b in zip(seq, seq[1:]))
    order = math.log2(seq[-2] / seq[-1]) / math.log2(probe[-1].point["grid"] / probe[-2].point["grid"]) \
        if dec else math.nan
    out.append(Check("identity residual order under refinement", order, ">= 1", dec and order >= 1.0))
    return out


def _rates_checks(cfg, records, fits):
    out = []
    for regime in cfg.regimes:
        rs = sorted((r for r in records if r.point["regime"] == regime), key=lambda r: -r.point["epsilon"])
        if any(r.status != "ok" for r in rs):
            msg = next(r.message for r in rs if r.status != "ok")
            out.append(Check(f"{regime}: all points solved ({msg})", math.nan, "no errors", False))
            continue
        h1 = [r.values["zeta_h1"] for r in rs]
        dec = all(b < a for a, b in zip(h1, h1[1:]))
        out.append(Check(f"{regime}: H1 discrepancy decreasing in eps", h1[-1], "strictly decreasing", dec))
        if regime == "super":
            wm = [r.values["weak_metric"] for r in rs]
            out.append(Check("super: weak-limit metric decreasing in eps", wm[-1], "strictly decreasing",
                             all(b < a for a, b in zip(wm, wm[1:]))))
        else:
            ratio = [r.values["zeta_h1"] / r.values["bound"] for r in rs]
            spread = max(ratio) / min(ratio)
            out.append(Check(f"{regime}: ||zeta|| / bound spread", spread, f"<= {cfg.tol('trend', 1.3):g}",
                             spread <= cfg.tol("trend", 1.3)))
        eps = [r.point["epsilon"] for r in rs]
        if len(rs) >= 3:
            fits[f"zeta_h1:{regime}"] = fit_rate(eps, h1)
    return out


# ---------------------------------------------------------------------------
# persistence


def _header(cfg: StudyConfig) -> list:
    ids, cols = _COLUMNS[cfg.kind]
    lines = [SCHEMA, f"# study: {cfg.name}", f"# kind: {cfg.kind}"]
    for c in cols:
        if c in cfg.tolerances:
            lines.append(f"# tolerance: {c}={_fmt(float(cfg.tolerances[c]))}")
    return lines


def _row(cfg: StudyConfig, rec: StudyRecord) -> list:
    ids, cols = _COLUMNS[cfg.kind]
    out = [str(rec.index), rec.status]
    out += [_fmt(rec.point[c]) if isinstance(rec.point[c], float) else str(rec.point[c]) for c in ids]
    out += [repr(rec.values[c]) if c in rec.values else "" for c in cols]
    out.append(rec.message)
    return out


def read_records(path) -> list:
    """Rows of a record CSV as dicts; numeric cells become floats, blanks NaN."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA:
            raise ValueError(f"{path}: not a {SCHEMA[2:]} file")
        body = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for row in csv.DictReader(body):
        conv = {}
        for k, v in row.items():
            if k in ("status", "message", "hole", "regime", "target"):
                conv[k] = v
            else:
                try:
                    conv[k] = float(v) if v != "" else math.nan
                except ValueError:
                    conv[k] = v
        rows.append(conv)
    return rows


def _environment() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "platform": platform.platform(), "time": time.strftime("%Y-%m-%dT%H:%M:%S")}


# ---------------------------------------------------------------------------
# runner


def run_study(cfg: StudyConfig, siblings: dict | None = None, write: bool = True) -> StudyResult:
    """Run every point of ``cfg``; records are appended in point order as they finish."""
    points = _points(cfg)
    if not points:
        raise StudyError(f"study {cfg.name!r} has no points")
    csv_path = Path(cfg.output) / f"{cfg.name}.csv"
    fh = None
    if write:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        fh = open(csv_path, "w", newline="")
        fh.write("\n".join(_header(cfg)) + "\n")
        ids, cols = _COLUMNS[cfg.kind]
        csv.writer(fh).writerow(["index", "status", *ids, *cols, "message"])
        fh.flush()

    records: list = [None] * len(points)
    times: list = [0.0] * len(points)
    written = 0

    def deliver(i, rec, dt):
        nonlocal written
        records[i], times[i] = rec, dt
        while written < len(points) and records[written] is not None:
            if fh is not None:
                csv.writer(fh).writerow(_row(cfg, records[written]))
                fh.flush()
                os.fsync(fh.fileno())
            written += 1

    try:
        if cfg.kind == "determinism":
            for i, p in enumerate(points):
                t = time.perf_counter()
                try:
                    rec = StudyRecord(i, p, _eval_determinism(cfg, p, siblings or {}))
                except Exception as exc:
                    rec = StudyRecord(i, p, {}, "error", f"{type(exc).__name__}: {exc}")
                deliver(i, rec, time.perf_counter() - t)
        elif cfg.workers == 1:
            for i, p in enumerate(points):
                deliver(i, *_evaluate(cfg, i, p))
        else:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                futs = [pool.submit(_evaluate, cfg, i, p) for i, p in enumerate(points)]
                for i, fu in enumerate(futs):
                    deliver(i, *fu.result())
    finally:
        if fh is not None:
            fh.close()

    fits, checks = _finalize(cfg, records)
    result = StudyResult(cfg, records, fits, checks, times)
    if write:
        side = {"schema": SCHEMA[2:], "config": _section(cfg), "environment": _environment(),
                "wall_times": times,
                "fits": {k: {"coefficient": f.coefficient, "exponent": f.exponent, "r2": f.r2, "law": f.law}
                         for k, f in fits.items()},
                "checks": [{"name": c.name, "value": c.value, "target": c.target, "passed": c.passed,
                            "mandatory": c.mandatory} for c in checks],
                "passed": result.passed}
        with open(csv_path.with_suffix(".json"), "w") as js:
            json.dump(side, js, indent=2, default=float)
    return result


def run_config(path_or_text, names=None, output: str | None = None, workers: int | None = None) -> list:
    """Run the studies of a config file (all, or those in ``names``) and return their results."""
    configs = load_config(path_or_text)
    if output is not None or workers is not None:
        configs = [replace(c, output=output or c.output, workers=workers or c.workers) for c in configs]
    siblings = {c.name: c for c in configs}
    if names:
        missing = set(names) - set(siblings)
        if missing:
            raise StudyError(f"unknown studies: {sorted(missing)}")
        configs = [c for c in configs if c.name in names]
    return [run_study(c, siblings) for c in configs]
