"""Command line front end.

Exit codes: 0 success, 1 config or validation error, 2 solver failure
(best-effort report still written), 3 sweep finished with failed points.
"""

import argparse
import os
import sys

from .analysis import SWEEP_COLUMNS, compute_diagnostics, sweep_epsilon, sweep_k
from .config import load_config, serialize_config
from .errors import ConfigError, NSF2DError
from .fixedpoint import solve_coupled
from .grid import field_to_csv
from .params import validate_params
from .reporting import fmt_num, section, write_csv
from .subsolvers import State
from .verification import run_invariant_suite, run_mms_suite


def _outdir(cfg, override):
    out = override or os.environ.get("NSF2D_OUTDIR") or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _initial_state(cfg, g):
    if cfg.initial_state:
        g_in, state = State.load(cfg.initial_state)
        if (g_in.nx, g_in.ny) != (g.nx, g.ny):
            raise ConfigError(
                f"initial state grid {g_in.nx}x{g_in.ny} does not match config {g.nx}x{g.ny}"
            )
        return state
    return State.rest(g, cfg.approx().h)


def _write_report(path, blocks, timing_lines):
    lines = []
    for title, body in blocks:
        lines.extend(section(title, body))
    # timing is deliberately the last block; determinism checks stop above it
    lines.extend(section("timing (excluded from determinism)", timing_lines))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))


def _dump_fields(outdir, g, state, mp, K):
    from .analysis import compute_evf

    field_to_csv(g, state.rho, os.path.join(outdir, "rho.csv"), "cells")
    field_to_csv(g, state.s, os.path.join(outdir, "s.csv"), "cells")
    field_to_csv(g, state.theta, os.path.join(outdir, "theta.csv"), "cells")
    field_to_csv(g, state.vel.u, os.path.join(outdir, "u.csv"), "ufaces")
    field_to_csv(g, state.vel.v, os.path.join(outdir, "v.csv"), "vfaces")
    field_to_csv(g, compute_evf(state, mp, K, g), os.path.join(outdir, "G.csv"), "cells")


def cmd_run(args):
    cfg = load_config(args.config)
    report = validate_params(cfg.model, strict=cfg.strict)
    if not report.ok:
        bad = ", ".join(f"{c.name} ({c.description})" for c in report.failures())
        print(f"error: parameter validation failed: {bad}", file=sys.stderr)
        return 1
    g = cfg.grid()
    ap = cfg.approx()
    K = cfg.truncation()
    outdir = _outdir(cfg, args.out)
    initial = _initial_state(cfg, g)

    checkpoints = []

    def checkpoint(state, t):
        path = os.path.join(outdir, f"checkpoint_t{fmt_num(t)}.state")
        state.save(path, g)
        checkpoints.append(path)

    state, fp_report = solve_coupled(
        initial, cfg.schedule, cfg.model, ap, K, g, cfg.options, checkpoint=checkpoint
    )
    state.save(os.path.join(outdir, "state.out"), g)
    blocks = [
        ("config", serialize_config(cfg).splitlines()),
        ("validation", report.to_lines()),
        ("fixedpoint", [ln for ln in fp_report.to_lines() if not ln.startswith("final residual")]
                        + [f"final residual {k}: {v:.12e}" for k, v in fp_report.final_residuals.items()]),
    ]
    if fp_report.success:
        diag = compute_diagnostics(state, cfg.model, ap, K, g, cfg.eta)
        blocks.append(("diagnostics", diag.to_lines()))
    if cfg.dump_fields:
        _dump_fields(outdir, g, state, cfg.model, K)
    _write_report(
        os.path.join(outdir, "report.txt"),
        blocks,
        [f"wall time: {fp_report.wall_time:.3f} s"],
    )
    if not fp_report.success:
        print(f"solver failure; best-effort report in {outdir}", file=sys.stderr)
        return 2
    print(f"run complete; report in {outdir}")
    return 0


def cmd_sweep(args):
    cfg = load_config(args.config)
    report = validate_params(cfg.model, strict=cfg.strict)
    if not report.ok:
        bad = ", ".join(c.name for c in report.failures())
        print(f"error: parameter validation failed: {bad}", file=sys.stderr)
        return 1
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            print(f"error: cannot parse --values {args.values!r}", file=sys.stderr)
            return 1
    else:
        values = list(cfg.sweep_epsilon if args.sweep == "epsilon" else cfg.sweep_k)
    g = cfg.grid()
    ap = cfg.approx()
    K = cfg.truncation()
    outdir = _outdir(cfg, args.out)
    initial = _initial_state(cfg, g)
    driver = sweep_epsilon if args.sweep == "epsilon" else sweep_k
    try:
        result = driver(values, initial, cfg.schedule, cfg.model, ap, K, g,
                        cfg.options, cfg.eta)
    except NSF2DError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    table = os.path.join(outdir, f"sweep_{args.sweep}.csv")
    write_csv(table, SWEEP_COLUMNS, result.rows())
    statuses = ", ".join(f"{p.param:g}:{p.status}" for p in result.points)
    print(f"sweep table written to {table} ({statuses})")
    return 0 if result.all_converged else 3


def cmd_verify(args):
    if args.suite == "invariants":
        results = run_invariant_suite()
    elif args.suite == "mms":
        results, rows = run_mms_suite()
        print("grids: 32^2, 64^2, 128^2")
        for name, errs, order, floor in rows:
            errtxt = ", ".join(f"{e:.4e}" for e in errs)
            print(f"{name:<11s} errors [{errtxt}]  observed order {order:.3f}  floor {floor}")
    else:
        print(f"error: unknown suite {args.suite!r} (use mms or invariants)", file=sys.stderr)
        return 1
    ok = True
    for r in results:
        print(r.line())
        ok = ok and r.passed
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nsf2d",
        description="Steady compressible heat-conducting flow: truncated, "
        "regularized system, fixed-point driver, and limit diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve the coupled system for one config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="override output directory")
    p_run.set_defaults(func=cmd_run)
    p_sweep = sub.add_parser("sweep", help="parameter sweep with warm starts")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--sweep", required=True, choices=("epsilon", "k"))
    p_sweep.add_argument("--values", default=None, help="comma-separated values")
    p_sweep.add_argument("--out", default=None)
    p_sweep.set_defaults(func=cmd_sweep)
    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("--suite", required=True)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NSF2DError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
