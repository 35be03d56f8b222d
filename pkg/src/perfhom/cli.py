"""Command line entry point ``perfhom``; exit status 0 iff every mandatory check passes."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .bie import kernel_basis
from .cell import cell_average, effective_matrix, sigma, solve_cell
from .geometry import LameParams, build_perforation, panelize, parse_hole
from .homogenize import (bump, grid_cell_field, oscillating_test_identity, poincare_ratio, solve_perforated,
                         write_grid)
from .studies import LOADS, Check, default_config_path, run_config


def _report(checks) -> int:
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks if c.mandatory) else 1


def _params(args) -> LameParams:
    return LameParams(args.lam, args.mu)


def _matrix(name, A):
    rows = "; ".join(" ".join(f"{v: .12e}" for v in row) for row in A)
    print(f"{name} = [{rows}]")


def cmd_verify(args) -> int:
    results = run_config(args.config or default_config_path(), ["kernel-identity", "jump-relations"],
                         output=args.output)
    checks = [c for r in results for c in r.checks]
    params = LameParams(1.0, 1.0)
    kb = kernel_basis(panelize(parse_hole("circle:0.25"), 256), params)
    A = kb.A_T
    checks.append(Check("A_T symmetry (circle:0.25)", abs(A[0, 1] - A[1, 0]), "<= 1e-08",
                        abs(A[0, 1] - A[1, 0]) <= 1e-8))
    checks.append(Check("A_T kernel gap (circle:0.25)", float(kb.singular_values[2]), ">= 0.001",
                        kb.singular_values[1] <= 1e-8 and kb.singular_values[2] >= 1e-3))
    return _report(checks)


def cmd_kernel_basis(args) -> int:
    kb = kernel_basis(panelize(parse_hole(args.hole), args.nodes), _params(args))
    _matrix("A_T", kb.A_T)
    print("smallest singular values:", " ".join(f"{s:.3e}" for s in kb.singular_values))
    print(f"rescale factor: {kb.rescale:g}")
    sym = abs(kb.A_T[0, 1] - kb.A_T[1, 0])
    return _report([
        Check("A_T symmetry", sym, "<= 1e-08", sym <= 1e-8),
        Check("constancy of S[phi*] on the hole", kb.constancy_residual, "<= 1e-08", kb.constancy_residual <= 1e-8),
        Check("kernel gap", float(kb.singular_values[2]), ">= 0.001", kb.singular_values[2] >= 1e-3),
    ])


def cmd_cell(args) -> int:
    params = _params(args)
    sol = solve_cell(parse_hole(args.hole), args.eta, params, n_nodes=args.nodes)
    avg = cell_average(sol, method=args.method)
    _matrix("c", sol.c)
    _matrix("<chi>", avg)
    _matrix("<v> = <chi>/|log eta|", avg / sol.log_factor)
    _matrix("M (classical)", effective_matrix("classical", params, sol).M)
    print(f"(c1/2pi) = {params.c1 / (2 * np.pi):.12f}")
    return _report([
        Check("boundary trace of chi", sol.trace_residual, "<= 1e-06", sol.trace_residual <= 1e-6),
        Check("Nystrom solve residual", sol.solve_residual, "<= 1e-10", sol.solve_residual <= 1e-10),
        Check("constant-part balance", sol.balance_residual, "<= 1e-08", sol.balance_residual <= 1e-8),
    ])


def cmd_study(args) -> int:
    results = run_config(args.config or default_config_path(), args.name or None, output=args.output,
                         workers=args.workers)
    status = 0
    for r in results:
        print(f"== {r.config.name} ({r.config.kind})")
        for k, f in r.fits.items():
            print(f"   fit {k}: C = {f.coefficient:.6g}, p = {f.exponent:.6f}, R^2 = {f.r2:.6f}")
        if _report(r.checks) and r.config.mandatory:
            status = 1
    return status


def cmd_oracle(args) -> int:
    params = _params(args)
    curve = parse_hole(args.hole)
    f = LOADS["sine"]
    s = sigma(args.epsilon, args.eta).sigma
    u = solve_perforated(build_perforation(args.epsilon, args.eta, curve), f, params, args.grid)
    v = grid_cell_field(args.epsilon, args.eta, curve, params, args.grid, s)
    phi = bump(args.grid, (0.47, 0.55))
    ident = max(oscillating_test_identity(u, v[..., k], f, phi, s, params, k).residual for k in range(2))
    print(f"sigma_eps = {s:.6g}; CG iterations = {u.info.get('iterations')}; "
          f"||u||/(sigma ||grad u||) = {poincare_ratio(u, s):.6g}")
    if args.export:
        write_grid(args.export, u)
        print(f"wrote {args.export}")
    return _report([
        Check("energy identity", u.info["energy_residual"], "<= 1e-06", u.info["energy_residual"] <= 1e-6),
        Check("oscillating-test identity", ident, "<= 0.001", ident <= 1e-3),
    ])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="perfhom", description="Layer-potential homogenization toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def lame(p):
        p.add_argument("--lambda", dest="lam", type=float, default=1.0)
        p.add_argument("--mu", type=float, default=1.0)

    p = sub.add_parser("verify", help="kernel-identity and jump-relation suites")
    p.add_argument("--config", help="study config (default: shipped config)")
    p.add_argument("--output", default="perfhom-out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("kernel-basis", help="kernel densities and A_T of one hole")
    p.add_argument("--hole", default="circle:0.25")
    p.add_argument("--nodes", type=int, default=256)
    lame(p)
    p.set_defaults(func=cmd_kernel_basis)

    p = sub.add_parser("cell", help="periodic cell problem at one eta")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--hole", default="circle:0.25")
    p.add_argument("--nodes", type=int, default=256)
    p.add_argument("--method", choices=("boundary", "polar", "grid"), default="boundary")
    lame(p)
    p.set_defaults(func=cmd_cell)

    p = sub.add_parser("study", help="run studies from a config file")
    p.add_argument("--config", help="study config (default: shipped config)")
    p.add_argument("--name", action="append", help="run only this study (repeatable)")
    p.add_argument("--output")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("oracle", help="finite-difference perforated solve with structural checks")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--grid", type=int, required=True)
    p.add_argument("--hole", default="circle:0.25")
    p.add_argument("--export", help="write the solution as a flat binary grid file")
    lame(p)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as exc:
        print(f"perfhom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
