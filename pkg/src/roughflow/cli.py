"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 numerical non-convergence, 4 schema violation.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import brownian, flows
from .config import (
    CONVERGENCE_SCHEMA,
    LevyStatsConfig,
    ProblemConfig,
    SampleConfig,
    SchemaError,
    WongZakaiConfig,
    load_json,
)
from .path_lift import PathFormatError, PiecewisePath, signature
from .rde.expr import ExprSyntaxError
from .rde.fields import VectorFieldSet
from .rde.solver import LogODEGenerator, NotLieElement, SolverBlowUp, euler_generator, solve_path

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_SCHEMA = 4


class NonConvergence(RuntimeError):
    pass


def _fmt(v) -> str:
    return repr(float(v))


class _Table:
    """CSV with leading and trailing comment lines."""

    def __init__(self, header, comments=(), timestamp=True):
        self.header = list(header)
        self.rows = []
        self.head = list(comments)
        if timestamp:
            self.head.append(f"generated {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}")
        self.tail: list[str] = []

    def add(self, row):
        self.rows.append([c if isinstance(c, str) else _fmt(c) for c in row])

    def render(self) -> str:
        buf = io.StringIO()
        for c in self.head:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        for c in self.tail:
            buf.write(f"# {c}\n")
        return buf.getvalue()


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, newline="")


def _load(args):
    if not args.config:
        raise ValueError("--config is required")
    return load_json(args.config), Path(args.config).resolve().parent


# commands ------------------------------------------------------------------------------

def cmd_signature(args) -> int:
    src = args.input or args.config
    if not src:
        raise ValueError("an input CSV is required")
    with open(src, newline="") as fh:
        path = PiecewisePath.from_csv(fh)
    X = signature(path, N=args.level)
    _emit(json.dumps(X.to_json(), indent=1) + "\n", args.out)
    return EXIT_OK


def _problem(args, schema=None):
    obj, base = _load(args)
    cfg = ProblemConfig.from_dict(obj, base, **({"schema": schema} if schema else {}))
    if args.tol is not None:
        cfg.tol = args.tol
    return obj, cfg


def cmd_solve(args) -> int:
    _, cfg = _problem(args)
    F = cfg.vector_fields()
    X = cfg.build_driver(seed=args.seed, depth=args.depth)
    t0 = X.times[0] if cfg.t0 is None else cfg.t0
    t1 = X.times[-1] if cfg.t1 is None else cfg.t1
    if cfg.output_steps is not None:
        grid = np.linspace(t0, t1, cfg.output_steps + 1)
    else:
        grid = X.times[(X.times >= t0 - 1e-12) & (X.times <= t1 + 1e-12)]
    traj = solve_path(F, X, cfg.x0, grid, tol=cfg.tol, max_depth=cfg.max_depth, ode_substeps=cfg.ode_substeps)
    table = _Table(["t"] + [f"x{i + 1}" for i in range(cfg.dim)],
                   [f"depth {traj.depth}", f"last_delta {traj.last_delta!r}"]
                   + ([f"seed {args.seed}"] if args.seed is not None else []),
                   timestamp=not args.no_timestamp)
    for t, row in zip(traj.times, traj.values):
        table.add([t, *row])
    _emit(table.render(), args.out)
    if not traj.converged:
        raise NonConvergence(f"solver did not converge: last_delta = {traj.last_delta:.3e} at depth {traj.depth}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    obj, cfg = _problem(args, CONVERGENCE_SCHEMA)
    F = cfg.vector_fields()
    X = cfg.build_driver(seed=args.seed, depth=args.depth)
    s = X.times[0] if cfg.t0 is None else cfg.t0
    t = X.times[-1] if cfg.t1 is None else cfg.t1
    kind = obj.get("generator", "log_ode")
    mu = LogODEGenerator(F, X, cfg.ode_substeps).approx_flow() if kind == "log_ode" else euler_generator(F, X)
    rows = flows.convergence_table(mu, s, t, cfg.x0, obj["depths"])
    table = _Table(["depth", "delta"] + [f"x{i + 1}" for i in range(cfg.dim)],
                   [f"generator {kind}", f"exponent {mu.exponent!r}"], timestamp=not args.no_timestamp)
    for r in rows:
        table.add([str(r.depth), r.delta, *r.value])
    rate, resid = flows.fit_rate([r.depth for r in rows], [r.delta for r in rows])
    table.tail.append(f"fitted_slope {rate!r} residual {resid!r} guaranteed_min {mu.exponent - 1.0!r}")
    _emit(table.render(), args.out)
    deltas = [r.delta for r in rows if r.depth > 0]
    if any(not math.isfinite(d) for d in deltas) or (len(deltas) >= 2 and deltas[-1] > deltas[0]):
        raise NonConvergence(f"deltas do not decrease: last_delta = {deltas[-1]:.3e}")
    return EXIT_OK


def cmd_wong_zakai(args) -> int:
    obj, _ = _load(args)
    cfg = WongZakaiConfig.from_dict(obj)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    F = VectorFieldSet.from_text(cfg.dim, cfg.fields, cfg.drift)
    table = _Table(["seed", "depth", "gap"], [f"seeds {' '.join(map(str, cfg.seeds))}"],
                   timestamp=not args.no_timestamp)
    depths, logs = [], []
    for seed in cfg.seeds:
        for r in brownian.wong_zakai_experiment(F, cfg.x0, cfg.depths, seed, cfg.T, cfg.extra_depth, cfg.p):
            table.add([str(seed), str(r.depth), r.gap])
            if r.gap > 0:
                depths.append(r.depth)
                logs.append(r.gap)
    if len(set(depths)) >= 2:
        rate, resid = flows.fit_rate(depths, logs, floor=0.0)
        table.tail.append(f"fitted_slope {rate!r} residual {resid!r}")
    _emit(table.render(), args.out)
    return EXIT_OK


def cmd_levy_stats(args) -> int:
    obj = _load(args)[0] if args.config else {}
    cfg = LevyStatsConfig.from_dict(obj)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.depth is not None:
        cfg.depth = args.depth
    st = brownian.levy_area_stats(cfg.samples, cfg.depth, cfg.T, cfg.seed)
    table = _Table(["statistic", "value", "ci_low", "ci_high"],
                   [f"seed {cfg.seed}", f"depth {cfg.depth}", f"samples {cfg.samples}", f"T {cfg.T!r}"],
                   timestamp=not args.no_timestamp)
    table.add(["mean", st.mean, *st.mean_ci()])
    table.add(["variance", st.variance, *st.variance_ci()])
    lo, hi = st.variance_ci()
    target = cfg.T**2 / 4
    table.tail.append(f"oracle_variance {target!r} within_3sigma {str(lo <= target <= hi).lower()}")
    _emit(table.render(), args.out)
    return EXIT_OK


def cmd_brownian_sample(args) -> int:
    obj = _load(args)[0] if args.config else {}
    cfg = SampleConfig.from_dict(obj)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.depth is not None:
        cfg.depth = args.depth
    s = brownian.sample(cfg.dim, cfg.depth, cfg.T, cfg.seed)
    table = _Table(["t"] + [f"x{i + 1}" for i in range(cfg.dim)], [f"seed {cfg.seed}", f"depth {cfg.depth}"],
                   timestamp=not args.no_timestamp)
    for t, row in zip(s.times, s.values):
        table.add([t, *row])
    _emit(table.render(), args.out)
    return EXIT_OK


COMMANDS = {
    "signature": cmd_signature,
    "solve": cmd_solve,
    "convergence": cmd_convergence,
    "wong-zakai": cmd_wong_zakai,
    "levy-stats": cmd_levy_stats,
    "brownian-sample": cmd_brownian_sample,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON problem or experiment file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--seed", type=int, help="RNG seed override")
    common.add_argument("--tol", type=float, help="convergence tolerance override")
    common.add_argument("--depth", type=int, help="dyadic depth override")
    common.add_argument("--no-timestamp", action="store_true", help="omit the timestamp comment")
    parser = argparse.ArgumentParser(prog="roughflow", description="rough-path numerics")
    sub = parser.add_subparsers(dest="command", required=True)
    sig = sub.add_parser("signature", parents=[common], help="signature of a CSV path, as JSON")
    sig.add_argument("input", nargs="?", help="CSV with header t,x1,...,xl")
    sig.add_argument("--level", "-N", type=int, choices=(1, 2, 3), default=2)
    sub.add_parser("solve", parents=[common], help="solve an RDE problem, trajectory as CSV")
    sub.add_parser("convergence", parents=[common], help="per-depth deltas of a flow generator")
    sub.add_parser("wong-zakai", parents=[common], help="ODE(B^(n)) against the Stratonovich RDE")
    sub.add_parser("levy-stats", parents=[common], help="Levy area Monte Carlo statistics")
    sub.add_parser("brownian-sample", parents=[common], help="a seeded Brownian sample as CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    except (NonConvergence, SolverBlowUp) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except PathFormatError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (ExprSyntaxError, NotLieElement, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
