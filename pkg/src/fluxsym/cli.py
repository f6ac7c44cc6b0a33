"""Batch command-line surface.

Subcommands:
    derive    derive the determining equations, audit the published set
    cases     enumerate the six material-family cases with verification
    verify    closure check, material residuals, invariance refinement study
    simulate  bare PDE solve with CSV export and a JSON metadata sidecar

Every command honors --seed, --out and --json; a JSON config file can
pre-populate any long option (explicit flags win).  Reports are
byte-stable across runs for a fixed seed.

Exit codes: 0 success; 2 derivation/verification failure; 3 audit rows
outside {reproduced, implied} under --strict-audit.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import reports
from .characteristics import (
    CASE_CONSTRAINTS, constant_material_constraints, enumerate_cases,
)
from .isovector import (
    audit_against_published, closure_check, extract_determining,
    DerivationError,
)
from .kernel import to_text
from .model import Model
from .numerics import (
    GridSpec, MaterialModel, TransformParams, compile_numeric,
    DEFAULT_SAMPLED_FNS, export_csv, invariance_residual, material_residual,
    max_interior_residual, solve_pde, SolverError,
)
from .parser import parse

_CONFIG_KEYS = {
    "geometry", "seed", "tol", "out", "json", "strict_audit", "case",
    "a1", "a2", "a3", "a4", "a6", "eps", "r0", "r1", "t1", "nr", "nt",
    "refine", "closure", "invariance", "materials", "diffusion", "gamma",
    "speed", "initial", "bc_left", "bc_right", "amplitude",
}


def _load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise SystemExit("config file must hold a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise SystemExit(f"unknown config keys: {sorted(unknown)}")
    return data


def _merge_config(args: argparse.Namespace, parser: argparse.ArgumentParser):
    if getattr(args, "config", None) is None:
        return args
    data = _load_config(args.config)
    defaults = parser.parse_args([args.command])
    for key, value in data.items():
        if hasattr(args, key) and getattr(args, key) == getattr(defaults, key, None):
            setattr(args, key, value)
    return args


def _geometry_mode(text):
    if text == "symbolic":
        return "symbolic"
    try:
        return int(text)
    except ValueError:
        raise SystemExit(f"--n must be symbolic, 0, 1 or 2 (got {text!r})")


def _a_values(args) -> dict:
    a = {f"a{i}": 0.0 for i in range(1, 9)}
    for name in ("a1", "a2", "a3", "a4", "a6"):
        a[name] = float(getattr(args, name))
    a["a8"] = a["a6"] - a["a2"]
    return a


def _case_materials(case_id: str, a: dict, amplitude: float, model: Model):
    """Numeric material callables for one case instance with the default
    sampled functions G(x)=exp(-x^2) and F(x)=amplitude/(1+x^2).

    When a3 = 0 the generic compiled form of Gamma is indeterminate at
    t = 0; for the F above with a4 = 2*a2 the family member has the closed
    form amplitude/(a3 + a4 t + r^2), which is used directly.
    """
    cases = {c.case_id: c for c in enumerate_cases(model, verify=False)}
    case = cases[case_id]
    params = {k: v for k, v in a.items()}
    params["C"] = amplitude
    fns = {
        "G": lambda x: np.exp(-x * x),
        "G'": lambda x: -2 * x * np.exp(-x * x),
        "F": lambda x: amplitude / (1.0 + x * x),
        "F'": lambda x: -2 * amplitude * x / (1.0 + x * x) ** 2,
    }
    d_fn = compile_numeric(case.diffusion.expression, params=params, fns=fns)
    if a["a3"] == 0.0:
        if abs(a["a4"] - 2 * a["a2"]) > 1e-12:
            raise SystemExit(
                "a3 = 0 needs a4 = 2*a2 for the closed-form Gamma member")
        shift = a["a1"] / a["a2"] if a["a1"] else 0.0
        def g_fn(r, t):
            r = np.asarray(r, float) + shift
            t = np.asarray(t, float)
            return amplitude / (a["a3"] + a["a4"] * t + r * r) * np.ones(
                np.broadcast_shapes(r.shape, t.shape))
    else:
        g_fn = compile_numeric(case.gamma.expression, params=params, fns=fns)
    return MaterialModel(D=d_fn, Gamma=g_fn, v=1.0), case


def _emit(args, command: str, body: dict) -> None:
    text = reports.write_report(args.out, command, body, args.seed)
    if args.json:
        sys.stdout.write(text)


def cmd_derive(args) -> int:
    model = Model()
    mode = _geometry_mode(args.geometry)
    try:
        system = extract_determining(model, mode)
    except DerivationError as exc:
        print(f"derivation failed: {exc}", file=sys.stderr)
        return 2
    audit = audit_against_published(system, model)
    body = {
        "determining_system": reports.determining_system_payload(system),
        "audit": reports.audit_payload(audit),
    }
    _emit(args, "derive", body)
    if not args.json:
        print(f"# determining equations (geometry: {mode})")
        for c in system.constraints:
            note = f"   [{c.assumption}]" if c.assumption else ""
            print(f"- {c.solved}{note}")
        print(f"- D condition: {to_text(system.diffusion_pde_reduced)} = 0")
        print(f"- Gamma condition: {to_text(system.gamma_pde)} = 0")
        print("\n# audit")
        for row in audit.rows:
            print(f"- {row.identifier}: {row.status}" +
                  (f" ({row.note})" if row.note else ""))
    if audit.unknown_verdicts or system.unknown_verdicts:
        print("unknown zero-verdicts present", file=sys.stderr)
        return 2
    if args.strict_audit:
        bad = [r for r in audit.rows
               if r.status not in ("reproduced", "implied")]
        if bad:
            for row in bad:
                print(f"strict audit: {row.identifier} is {row.status}: "
                      f"{row.note}", file=sys.stderr)
            return 3
    return 0


def cmd_cases(args) -> int:
    model = Model()
    tol = args.tol if args.tol is not None else 1e-10
    results = enumerate_cases(model, seed=args.seed, tol=tol)
    if args.case:
        results = [c for c in results if c.case_id == args.case]
        if not results:
            print(f"unknown case {args.case!r}", file=sys.stderr)
            return 2
    body = {"cases": [reports.case_payload(c) for c in results]}
    _emit(args, "cases", body)
    failed = False
    for c in results:
        ok = all(chk.verdict in ("zero", "numeric-only")
                 for chk in (c.diffusion_check, c.gamma_check))
        failed |= not ok
        if not args.json:
            print(f"# case {c.case_id}  constraints: {', '.join(c.constraints)}"
                  + (f"  (same family as {c.coincides_with})"
                     if c.coincides_with else ""))
            print(f"  D     = {to_text(c.diffusion.expression)}")
            print(f"  Gamma = {to_text(c.gamma.expression)}")
            print(f"  back-substitution: D {c.diffusion_check.verdict}, "
                  f"Gamma {c.gamma_check.verdict}")
            for note in c.notes:
                print(f"  note: {note}")
    return 2 if failed else 0


def cmd_verify(args) -> int:
    model = Model()
    tol = args.tol if args.tol is not None else 1e-6
    body = {}
    failures = []
    if args.closure:
        result = closure_check(model)
        body["closure"] = reports.closure_payload(result)
        if not args.json:
            state = ("identically satisfied" if result.identically_zero
                     else f"RESIDUAL {to_text(result.residual)}")
            print(f"# closure: {state}")
        if not result.identically_zero:
            failures.append("closure residual nonzero")
    if args.case:
        a = _a_values(args)
        grid = GridSpec(args.r0, args.r1, args.t1, args.nr, args.nt,
                        geometry=0)
        material, _ = _case_materials(args.case, a, args.amplitude, model)
        params = TransformParams(args.eps, a)
        # the finite-difference floor of the material check needs a fine
        # step; decouple it from the (coarse) solver grid
        fd_grid = GridSpec(args.r0, args.r1, args.t1,
                           max(args.nr, 4096), max(args.nt, 4096), geometry=0)
        res = material_residual(material, params, fd_grid)
        body["material_residuals"] = res
        if not args.json:
            print(f"# case {args.case} material residuals: "
                  f"D {res['res_D']:.3e}, Gamma {res['res_Gamma']:.3e} "
                  f"(tolerance {tol:g})")
        if max(res["res_D"], res["res_Gamma"]) > tol:
            failures.append("material residual exceeds tolerance")
        if args.invariance:
            ic = lambda r: 1.0 + np.cos(
                math.pi * (r - args.r0) / (args.r1 - args.r0))
            bc = (("zero_gradient",), ("zero_gradient",))
            report = invariance_residual(grid, material, params, ic, bc,
                                         refinements=args.refine + 1)
            body["invariance"] = reports.invariance_payload(report)
            if not args.json:
                print("# invariance refinement study")
                for lvl, res_l in zip(report.levels, report.residuals):
                    print(f"  grid {lvl[0]}x{lvl[1]}: residual {res_l:.3e}")
                print("  ratios: " +
                      ", ".join(f"{x:.2f}" for x in report.ratios))
            if report.ratios and not (2.8 <= report.ratios[-1] <= 5.2):
                failures.append(
                    f"invariance ratio {report.ratios[-1]:.2f} outside 4 +/- 30%")
    body["constant_materials"] = constant_material_constraints(model)
    _emit(args, "verify", body)
    for f in failures:
        print(f"verify: {f}", file=sys.stderr)
    return 2 if failures else 0


def _parse_bc(text):
    if text == "zero_gradient":
        return ("zero_gradient",)
    if text.startswith("dirichlet:"):
        return ("dirichlet", float(text.split(":", 1)[1]))
    raise SystemExit(f"bad boundary spec {text!r} "
                     "(zero_gradient or dirichlet:<value>)")


def cmd_simulate(args) -> int:
    model = Model()
    table = model.table
    d_expr = parse(args.diffusion, table)
    g_expr = parse(args.gamma, table)
    material = MaterialModel(
        D=compile_numeric(d_expr, fns=DEFAULT_SAMPLED_FNS),
        Gamma=compile_numeric(g_expr, fns=DEFAULT_SAMPLED_FNS),
        v=args.speed,
    )
    grid = GridSpec(args.r0, args.r1, args.t1, args.nr, args.nt,
                    geometry=int(args.geometry))
    ic_expr = parse(args.initial, table)
    ic_fn = compile_numeric(ic_expr, args=("r",), fns=DEFAULT_SAMPLED_FNS)
    bc = (_parse_bc(args.bc_left), _parse_bc(args.bc_right))
    try:
        field = solve_pde(grid, material, ic_fn, bc)
    except SolverError as exc:
        print(f"simulate failed: {exc}", file=sys.stderr)
        return 2
    csv_path = args.csv or "field.csv"
    export_csv(field, csv_path)
    body = {
        "grid": {"r0": grid.r0, "r1": grid.r1, "t1": grid.t1,
                 "n_r": grid.n_r, "n_t": grid.n_t, "geometry": grid.geometry},
        "material": {"D": args.diffusion, "Gamma": args.gamma,
                     "v": args.speed},
        "boundary": {"left": args.bc_left, "right": args.bc_right},
        "csv": csv_path,
        "residual_norm": max_interior_residual(field),
    }
    _emit(args, "simulate", body)
    if not args.json:
        print(f"# wrote {csv_path} "
              f"({grid.n_t + 1} x {grid.n_r + 1} samples)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxsym",
        description="Translation/scaling symmetry analysis of the "
                    "time-dependent monoenergetic neutron diffusion equation")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="write the JSON report here")
        p.add_argument("--json", action="store_true",
                       help="print the JSON report to stdout")
        p.add_argument("--config", default=None,
                       help="JSON config merged under explicit flags")
        p.add_argument("--tol", type=float, default=None,
                       help="tolerance override for the numeric checks")

    p = sub.add_parser("derive", help="derive and audit the determining equations")
    common(p)
    p.add_argument("--n", dest="geometry", default="symbolic",
                   help="geometry index: symbolic, 0, 1 or 2")
    p.add_argument("--strict-audit", action="store_true",
                   help="exit 3 when any audit row is not reproduced/implied")

    p = sub.add_parser("cases", help="enumerate the six material-family cases")
    common(p)
    p.add_argument("--case", choices=sorted(CASE_CONSTRAINTS), default=None)

    p = sub.add_parser("verify", help="closure, material and invariance checks")
    common(p)
    p.add_argument("--closure", action="store_true")
    p.add_argument("--case", choices=sorted(CASE_CONSTRAINTS), default=None)
    p.add_argument("--invariance", action="store_true")
    p.add_argument("--a1", type=float, default=0.0)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--a3", type=float, default=0.0)
    p.add_argument("--a4", type=float, default=2.0)
    p.add_argument("--a6", type=float, default=0.0)
    p.add_argument("--eps", type=float, default=0.02)
    p.add_argument("--amplitude", type=float, default=0.5,
                   help="scale of the sampled arbitrary functions")
    p.add_argument("--r0", type=float, default=0.5)
    p.add_argument("--r1", type=float, default=1.5)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--nr", type=int, default=40)
    p.add_argument("--nt", type=int, default=40)
    p.add_argument("--refine", type=int, default=3)

    p = sub.add_parser("simulate", help="solve the diffusion equation, export CSV")
    common(p)
    p.add_argument("--n", dest="geometry", default="0",
                   help="geometry index 0, 1 or 2")
    p.add_argument("--D", dest="diffusion", default="1/2",
                   help="diffusion coefficient D(r, t) in the kernel grammar")
    p.add_argument("--Gamma", dest="gamma", default="0",
                   help="production coefficient Gamma(r, t)")
    p.add_argument("--v", dest="speed", type=float, default=1.0)
    p.add_argument("--initial", default="1 + r*0",
                   help="initial flux profile phi(r)")
    p.add_argument("--bc-left", default="zero_gradient")
    p.add_argument("--bc-right", default="zero_gradient")
    p.add_argument("--r0", type=float, default=0.0)
    p.add_argument("--r1", type=float, default=1.0)
    p.add_argument("--t1", type=float, default=1.0)
    p.add_argument("--nr", type=int, default=32)
    p.add_argument("--nt", type=int, default=32)
    p.add_argument("--csv", default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args = _merge_config(args, parser)
    np.random.seed(args.seed)
    handlers = {
        "derive": cmd_derive,
        "cases": cmd_cases,
        "verify": cmd_verify,
        "simulate": cmd_simulate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
