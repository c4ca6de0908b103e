"""Command-line entry point ``ppclust``.

Exit codes: 0 success, 1 invalid input, 2 an ``--assert`` check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from pathlib import Path

from .models import ModelSpec, ParameterError, base_quantile, generate_paths
from .oracles import (
    EnumerationLimitError,
    ExactEvent,
    UnsupportedModel,
    exact_prob,
    limit_count_law,
    limit_lambda_cluster,
    limit_lambda_Mx,
    limit_laplace,
    theta_exact,
)
from .pointproc import ClusterEvent, ObservableSet, TestFunction
from .runner import (
    ConfigError,
    assert_failures,
    cluster_rows,
    condition_rows,
    load_config,
    rows_to_csv,
    rows_to_json,
    run,
    tail_rows,
    theta_rows,
)
from .smooth import mblock_bound_check
from .thresholds import ThresholdMethod

__all__ = ["main", "build_parser"]

_ROW_COLUMNS = ("estimator", "params", "value", "stderr", "reps", "seed", "oracle_value", "z_score")
_CONDITION_COLUMNS = ("condition", "param", "value", "stderr", "reps")


def _ints(s: str) -> list[int]:
    return [int(float(v)) for v in s.split(",") if v.strip()]


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _model(s: str) -> ModelSpec:
    try:
        return ModelSpec.parse(s)
    except (ParameterError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="master seed (default 0; for 'run', the config seed)")
    g.add_argument("--reps", type=int, default=None, help="Monte Carlo replicates")
    g.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    g.add_argument("--out", default="-", help="output file ('-' for stdout) or, for 'run', a directory")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--assert", dest="assert_z", type=float, nargs="?", const=3.0, default=None,
                   metavar="Z", help="exit 2 if an acceptance-tagged |z| exceeds Z (default 3)")
    return p


def _model_args(p: argparse.ArgumentParser, with_grid: bool = True) -> None:
    p.add_argument("--model", type=_model, default=ModelSpec(), help="e.g. 'family=moving_max, m=3'")
    if with_grid:
        p.add_argument("--n", type=_ints, default=[10_000], help="comma-separated row lengths")
        p.add_argument("--rho", type=float, default=0.6, help="block length exponent, r_n = ceil(n^rho)")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="ppclust", description="Point-process limits of stationary arrays.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write simulated paths")
    _model_args(p, with_grid=False)
    p.add_argument("--n", type=int, default=1000)

    p = sub.add_parser("estimate-theta", parents=[common], help="runs, blocks and direct extremal index")
    _model_args(p)
    p.add_argument("--m", type=_ints, default=None, help="runs windows (default: model window)")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--threshold-method", choices=[t.value for t in ThresholdMethod], default="analytic")

    p = sub.add_parser("limit-quantities", parents=[common], help="block and telescoped functionals")
    _model_args(p)
    p.add_argument("--x", type=_floats, default=[1.0])
    p.add_argument("--m", type=_ints, default=None)
    p.add_argument("--event", action="append", default=[], help="cluster event, e.g. '(2,inf]>=2'; repeatable")

    p = sub.add_parser("check-conditions", parents=[common], help="AN, AC, m0, AIM and AD-1 diagnostics")
    _model_args(p)
    p.add_argument("--eps", type=_floats, default=[1.0, 2.0])
    p.add_argument("--m", type=_ints, default=None)
    p.add_argument("--no-ad1", action="store_true", help="skip the AD-1 gap")

    p = sub.add_parser("bound-check", parents=[common], help="both sides of the m-block bound")
    _model_args(p, with_grid=False)
    p.add_argument("--event", default="(1,inf]>=1")
    p.add_argument("--r", type=_ints, default=[10])
    p.add_argument("--m", type=_ints, default=None, help="default: every m in 1..r")
    p.add_argument("--prob", type=float, default=0.9,
                   help="base CDF value at the scale: scale = F_Y^{-1}(prob) (default 0.9)")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")

    p = sub.add_parser("oracle", parents=[common], help="closed-form limit and finite-n quantities")
    _model_args(p, with_grid=False)
    p.add_argument("--quantity", required=True,
                   choices=("theta", "lambda_mx", "lambda_cluster", "laplace", "count_law", "exact_prob"))
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--event", default="(1,inf]>=1")
    p.add_argument("--f", default="tent:1,3,1,2", help="test function 'tent:lo,hi[,peak[,at]]'")
    p.add_argument("--set", default="(1,inf]", help="one-sided set for count_law")
    p.add_argument("--kind", choices=[e.value for e in ExactEvent], default="max_leq")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--prob", type=float, default=None, help="level u given as F_Y(u)")
    p.add_argument("--u", type=float, default=None, help="level u")

    p = sub.add_parser("run", parents=[common], help="run an experiment config")
    p.add_argument("config", help="key = value config file")
    return parser


def _table(records: list[dict], columns, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([{c: r[c] for c in columns} for r in records], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in columns])
    return buf.getvalue()


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _emit_rows(rows, args) -> int:
    text = rows_to_json(rows, columns=_ROW_COLUMNS) if args.format == "json" else rows_to_csv(rows, columns=_ROW_COLUMNS)
    _emit(text, args.out)
    if args.assert_z is not None and assert_failures(rows, args.assert_z):
        return 2
    return 0


def _reps(args, default: int) -> int:
    return default if args.reps is None else args.reps


def _cmd_simulate(args) -> int:
    x = generate_paths(args.model, args.n, args.seed, range(_reps(args, 1)))
    if args.format == "json":
        _emit(json.dumps({"model": args.model.describe(), "seed": args.seed, "paths": x.tolist()}) + "\n", args.out)
        return 0
    buf = io.StringIO()
    buf.write("path,t,value\n")
    for i, row in enumerate(x):
        for t, v in enumerate(row, 1):
            buf.write(f"{i},{t},{float(v)!r}\n")
    _emit(buf.getvalue(), args.out)
    return 0


def _cmd_theta(args) -> int:
    ms = args.m or [args.model.window]
    rows = theta_rows(args.model, args.n, ms, args.rho, args.tau, _reps(args, 1000), args.seed,
                      threshold_method=ThresholdMethod(args.threshold_method), threads=args.threads)
    return _emit_rows(rows, args)


def _cmd_limits(args) -> int:
    ms = args.m or [args.model.window]
    reps = _reps(args, 500)
    rows = tail_rows(args.model, args.n, args.x, ms, args.rho, reps, args.seed, threads=args.threads)
    events = [ClusterEvent.parse(e) for e in args.event]
    if events:
        rows += cluster_rows(args.model, args.n, args.x, ms, events, args.rho, reps, args.seed, threads=args.threads)
    return _emit_rows(rows, args)


def _cmd_conditions(args) -> int:
    ms = args.m or [args.model.window]
    rows = condition_rows(args.model, args.n, args.eps, ms, None, args.rho, _reps(args, 500), args.seed,
                          ad1=not args.no_ad1, threads=args.threads)
    recs = [dict(condition=r.estimator, param=r.param_text, value=r.value, stderr=r.stderr, reps=r.reps)
            for r in rows]
    _emit(_table(recs, _CONDITION_COLUMNS, args.format), args.out)
    if args.assert_z is not None and assert_failures(rows, args.assert_z):
        return 2
    return 0


def _cmd_bound(args) -> int:
    event = ClusterEvent.parse(args.event)
    scale = base_quantile(args.model, args.prob)
    recs = []
    for r in args.r:
        for m in args.m or range(1, r + 1):
            if m > r:
                continue
            chk = mblock_bound_check(args.model, scale, event, m, r, args.mode, _reps(args, 10_000), args.seed)
            recs.append(dict(model=args.model.describe(), event=str(event), prob=args.prob, r=r, m=m,
                             lhs=chk.lhs, rhs=chk.rhs, stderr=chk.stderr, holds=chk.holds))
    cols = ("model", "event", "prob", "r", "m", "lhs", "rhs", "stderr", "holds")
    _emit(_table(recs, cols, args.format), args.out)
    return 0 if all(r["holds"] for r in recs) or args.assert_z is None else 2


def _level(args) -> float:
    if args.u is not None:
        return args.u
    if args.prob is None:
        raise ValueError("exact_prob needs --u or --prob")
    return base_quantile(args.model, args.prob)


def _cmd_oracle(args) -> int:
    q, m = args.quantity, args.model
    if q == "theta":
        recs = [dict(quantity=q, param="", value=theta_exact(m))]
    elif q == "lambda_mx":
        recs = [dict(quantity=q, param=f"x={args.x!r}", value=limit_lambda_Mx(m, args.x))]
    elif q == "lambda_cluster":
        ev = ClusterEvent.parse(args.event)
        recs = [dict(quantity=q, param=f"x={args.x!r};event={ev}", value=limit_lambda_cluster(m, ev, args.x))]
    elif q == "laplace":
        f = TestFunction.parse(args.f)
        recs = [dict(quantity=q, param=f"f={f}", value=limit_laplace(m, f))]
    elif q == "count_law":
        obs = ObservableSet.parse(args.set)
        pmf = limit_count_law(m, obs)
        recs = [dict(quantity=q, param=f"set={obs};k={k}", value=float(p)) for k, p in enumerate(pmf)]
    else:
        u = _level(args)
        recs = [dict(quantity=q, param=f"kind={args.kind};k={args.k};u={u!r}",
                     value=exact_prob(m, args.kind, args.k, u))]
    _emit(_table(recs, ("quantity", "param", "value"), args.format), args.out)
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.reps is not None or args.seed is not None:
        cfg = replace(cfg, reps=cfg.reps if args.reps is None else args.reps,
                      seed=cfg.seed if args.seed is None else args.seed)
    out = None if args.out == "-" else args.out
    return run(cfg, out=out, threads=args.threads, assert_z=args.assert_z)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "estimate-theta": _cmd_theta,
    "limit-quantities": _cmd_limits,
    "check-conditions": _cmd_conditions,
    "bound-check": _cmd_bound,
    "oracle": _cmd_oracle,
    "run": _cmd_run,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "run" and args.seed is None:
        args.seed = 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ParameterError, UnsupportedModel, EnumerationLimitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
