"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage error, 2 solver stopped
at its iteration limit, 3 no feasible kernel direction.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from .body import build_mapping
from .classic import solve_classic
from .config import (
    build_body,
    build_classic,
    build_convex,
    build_kb,
    build_scenario,
    build_smoothing,
    initial_commands,
    kb_document,
    load_config,
    load_kb_document,
)
from .convex import ConvexAllocator, Status
from .errors import AllocationError, ConfigError, InfeasibleKb, ScenarioError
from .kb import KbProblem, solve_kb
from .mapping import allocate_pinv, commands_to_forces, forces_to_commands
from .reproduce import FIGURES, reproduce
from .sim import run_scenario, tracking_metrics, write_csv
from .smooth import allocate_smooth

EXIT_OK, EXIT_CONFIG, EXIT_MAXITER, EXIT_INFEASIBLE = 0, 1, 2, 3


def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{what}: cannot parse {text!r} as comma-separated numbers") from exc
    if not all(math.isfinite(v) for v in vals):
        raise ConfigError(f"{what}: values must be finite")
    return vals


def _kernel(doc, mp, kb_path):
    if kb_path:
        return load_kb_document(kb_path, mp)
    return build_kb(doc, mp)


def cmd_allocate(args) -> int:
    doc = load_config(args.config)
    body = build_body(doc)
    mp = build_mapping(body)
    tau = np.array(_floats(args.wrench, "--wrench"))
    if tau.size != mp.n_axes:
        raise ConfigError(f"--wrench has {tau.size} values but the body controls {list(body.controlled_axes)}")
    report = {"method": args.method, "axes": list(body.controlled_axes), "wrench": tau.tolist()}
    status = Status.OPTIMAL
    slack = np.zeros(mp.n_axes)
    if args.method == "pinv":
        F = allocate_pinv(mp, tau)
        cmds = forces_to_commands(body, F)
    elif args.method == "smooth":
        F, diag = allocate_smooth(mp, _kernel(doc, mp, args.kb), build_smoothing(doc), tau)
        cmds = forces_to_commands(body, F)
        report["diagnostics"] = {"b": diag.b_value, "min_orth": diag.min_orth, "triggered": diag.triggered}
    elif args.method == "convex":
        w = build_convex(doc, body)
        kd = _kernel(doc, mp, args.kb) if w.q1 > 0 else None
        sm = build_smoothing(doc) if kd is not None else None
        sol = ConvexAllocator(mp, kd, sm, w, warm_start=False).solve(tau)
        F, slack, status = sol.F, sol.slack, sol.status
        cmds = forces_to_commands(body, F)
        report["diagnostics"] = {
            "status": sol.status.value,
            "iterations": sol.iterations,
            "objective": sol.objective,
            "b": sol.b_value,
            "polished": sol.polished,
        }
    else:
        cmds, slack = solve_classic(body, build_classic(doc), tau, initial_commands(doc, body))
        F = commands_to_forces(body, cmds)
    report["forces"] = [F[sl].tolist() for sl in mp.blocks]
    report["thrust"] = [c.thrust for c in cmds]
    report["alpha_deg"] = [math.degrees(c.alpha) for c in cmds]
    report["beta_deg"] = [math.degrees(c.beta) for c in cmds]
    report["slack"] = list(map(float, slack))
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(f"method: {args.method}")
        print(f"{'act':>4} {'thrust [N]':>14} {'alpha [deg]':>12} {'beta [deg]':>12}  force block")
        for i, c in enumerate(cmds):
            blk = " ".join(f"{v:12.4f}" for v in report["forces"][i])
            print(f"{i + 1:>4} {c.thrust:14.4f} {math.degrees(c.alpha):12.4f} {math.degrees(c.beta):12.4f}  {blk}")
        print("slack: " + " ".join(f"{a}={v:.6g}" for a, v in zip(body.controlled_axes, slack)))
        for k, v in report.get("diagnostics", {}).items():
            print(f"{k}: {v}")
    return EXIT_MAXITER if status is Status.MAX_ITERS else EXIT_OK


def cmd_solve_kb(args) -> int:
    doc = load_config(args.config)
    mp = build_mapping(build_body(doc))
    kbd = doc.kb
    typical = [_floats(t, "--typical") for t in args.typical] if args.typical else (kbd.typical if kbd else [])
    for t in typical:
        if len(t) != mp.n_axes:
            raise ConfigError(f"typical wrench {t} must have {mp.n_axes} values")
    seeds = args.seeds if args.seeds is not None else (kbd.seeds if kbd else 64)
    seed = args.seed if args.seed is not None else (kbd.seed if kbd else 0)
    sol = solve_kb(KbProblem(mp, typical), seeds=seeds, rng_seed=seed)
    text = json.dumps(kb_document(sol, typical), indent=2) + "\n"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = load_config(args.scenario)
    sc = build_scenario(doc, args.allocator)
    try:
        fh = open(args.out, "w", newline="")
    except OSError as exc:
        raise ConfigError(f"cannot write {args.out}: {exc.strerror}") from exc
    with fh:
        ts = run_scenario(sc)
        write_csv(ts, fh)
    if args.summary:
        m = tracking_metrics(ts)
        print(f"scenario: {sc.name} ({sc.allocator.value}), {len(ts)} steps")
        for a, v in m["rms_error"].items():
            print(f"  rms error {a:>3}: {v:.6g}")
        print(f"  max slack      : {m['max_slack']:.6g}")
        print(f"  max angle step : {math.degrees(m['max_angle_step']):.6g} deg")
        print(f"  power integral : {m['power_integral']:.6g} s")
    return EXIT_MAXITER if "max_iters" in ts.status else EXIT_OK


def cmd_reproduce(args) -> int:
    if args.figure not in FIGURES:
        raise ConfigError(f"unknown figure {args.figure!r}; valid: {', '.join(FIGURES)}")
    try:
        paths = reproduce(args.figure, args.outdir)
    except OSError as exc:
        raise ConfigError(f"cannot write to {args.outdir}: {exc.strerror}") from exc
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vecalloc", description="Thrust-vector control allocation")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("allocate", help="allocate one wrench")
    a.add_argument("--config", required=True)
    a.add_argument("--wrench", required=True, help="comma-separated values on the controlled axes")
    a.add_argument("--method", choices=["pinv", "smooth", "convex", "classic"], default="pinv")
    a.add_argument("--kb", help="K_b document written by solve-kb")
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_allocate)

    k = sub.add_parser("solve-kb", help="compute the rest-configuration kernel vector")
    k.add_argument("--config", required=True)
    k.add_argument("--typical", action="append", help="typical wrench, comma-separated (repeatable)")
    k.add_argument("--seeds", type=int)
    k.add_argument("--seed", type=int)
    k.add_argument("--out")
    k.set_defaults(func=cmd_solve_kb)

    s = sub.add_parser("simulate", help="run a scenario and write its time series")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--allocator", choices=["pinv", "smooth", "convex", "classic"])
    s.add_argument("--summary", action="store_true")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="write the CSV curves of a figure")
    r.add_argument("--figure", required=True)
    r.add_argument("--outdir", default=".")
    r.set_defaults(func=cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InfeasibleKb as exc:
        print(f"error: infeasible K_b ({exc.n_binding} binding constraints): {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ScenarioError as exc:
        if isinstance(exc.cause, InfeasibleKb):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AllocationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
