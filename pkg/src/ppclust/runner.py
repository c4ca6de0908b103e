"""Experiment configuration, parameter sweeps and result files.

A config is a flat ``key = value`` file with an ``[experiment]`` section and an
optional ``[output]`` section::

    [experiment]
    model = family=moving_max, m=2
    n = 1000, 10000
    reps = 200
    seed = 7
    tasks = theta, tail

Lists are comma separated; cluster events and test functions, which contain
commas themselves, are separated by ``|``.
"""

from __future__ import annotations

import configparser
import csv
import enum
import hashlib
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .conditions import ad1_gap, aim_gap, an_diagnostic, estimate_m0, ac_profile
from .estimate import Estimate
from .estimators import (
    block_cluster,
    block_tail,
    difference_diagnostic,
    extremal_index_all,
    telescope_cluster,
    telescope_tail,
)
from .models import ModelSpec, ParameterError, generate_sequence, marginal_tail
from .oracles import (
    UnsupportedModel,
    ad1_gap_exact_iid,
    aim_gap_exact,
    limit_lambda_cluster,
    limit_lambda_Mx,
    theta_exact,
)
from .pointproc import ClusterEvent, TestFunction, tent_family
from .thresholds import ThresholdMethod, make_scheme, threshold_analytic, threshold_empirical

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "Row",
    "PlotKind",
    "TASKS",
    "COLUMNS",
    "load_config",
    "parse_config",
    "run",
    "theta_rows",
    "tail_rows",
    "cluster_rows",
    "condition_rows",
    "rows_to_csv",
    "rows_to_json",
    "emit_plot_data",
    "assert_failures",
]

TASKS = ("theta", "tail", "cluster", "conditions")
COLUMNS = ("estimator", "params", "value", "stderr", "reps", "seed", "oracle_value", "z_score",
           "acceptance", "flag", "config_hash")
EMPIRICAL_PILOT_FACTOR = 100


class ConfigError(ValueError):
    """Invalid experiment configuration; carries the offending field and line."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field, self.line = field, line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


# ----------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    n_grid: tuple[int, ...]
    reps: int
    seed: int
    rho: float = 0.6
    tau: float = 1.0
    threshold_method: ThresholdMethod = ThresholdMethod.ANALYTIC
    x_grid: tuple[float, ...] = (1.0,)
    eps_grid: tuple[float, ...] = (1.0, 2.0)
    m_grid: tuple[int, ...] = ()
    events: tuple[ClusterEvent, ...] = ()
    test_functions: str = "tents12"
    tasks: tuple[str, ...] = ("theta",)
    out: str = "results"
    out_format: str = "both"

    def __post_init__(self) -> None:
        for name in ("n_grid", "x_grid", "eps_grid", "tasks"):
            if not getattr(self, name):
                raise ConfigError("grid must be nonempty", name)
        if not self.m_grid:
            object.__setattr__(self, "m_grid", (self.model.window,))
        if any(n < 2 for n in self.n_grid):
            raise ConfigError("every n must be >= 2", "n")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1", "reps")
        if any(m < 1 for m in self.m_grid):
            raise ConfigError("every m must be >= 1", "m")
        bad = [t for t in self.tasks if t not in TASKS]
        if bad:
            raise ConfigError(f"unknown task(s) {bad}; choose from {list(TASKS)}", "tasks")
        if "cluster" in self.tasks and not self.events:
            raise ConfigError("task 'cluster' needs at least one event", "events")
        if self.out_format not in ("csv", "json", "both"):
            raise ConfigError("format must be csv, json or both", "format")
        self.functions()

    def functions(self) -> list[TestFunction]:
        if self.test_functions == "tents12":
            return tent_family()
        try:
            return [TestFunction.parse(t) for t in self.test_functions.split("|") if t.strip()]
        except ValueError as exc:
            raise ConfigError(str(exc), "test_functions") from exc

    def canonical(self) -> dict:
        """Plain-data view used for the manifest and the config hash."""
        return {
            "model": self.model.describe(),
            "n": list(self.n_grid),
            "reps": self.reps,
            "seed": self.seed,
            "rho": self.rho,
            "tau": self.tau,
            "threshold_method": self.threshold_method.value,
            "x": list(self.x_grid),
            "eps": list(self.eps_grid),
            "m": list(self.m_grid),
            "events": [str(e) for e in self.events],
            "test_functions": self.test_functions,
            "tasks": list(self.tasks),
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_KEYS = {
    "experiment": {"model", "n", "reps", "seed", "rho", "tau", "threshold_method", "x", "eps", "m",
                   "events", "test_functions", "tasks"},
    "output": {"path", "format"},
}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        head = re.match(r"^\[(.+)\]$", s)
        if head:
            current = head.group(1).strip().lower()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None and re.match(rf"^{re.escape(key)}\s*[=:]", s, re.I):
            return i
    return None


def _split(value: str, sep: str = ",") -> list[str]:
    return [v.strip() for v in value.split(sep) if v.strip()]


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; every failure raises :class:`ConfigError` with a line number."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), line=getattr(exc, "lineno", None)) from exc
    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"unknown section [{section}]", line=_line_of(text, section))
        for key in cp[section]:
            if key not in _KEYS[section]:
                raise ConfigError("unknown key", key, _line_of(text, section, key))
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section")
    ex = cp["experiment"]

    def get(key: str, conv, default=None, required: bool = False):
        if key not in ex:
            if required:
                raise ConfigError("required field missing", key, _line_of(text, "experiment"))
            return default
        raw = ex[key]
        try:
            return conv(raw)
        except (ValueError, TypeError, ParameterError) as exc:
            raise ConfigError(f"{exc} (value {raw!r})", key, _line_of(text, "experiment", key)) from exc

    def ints(s: str) -> tuple[int, ...]:
        out = []
        for v in _split(s):
            f = float(v)
            if f != int(f):
                raise ValueError(f"{v} is not an integer")
            out.append(int(f))
        return tuple(out)

    def floats(s: str) -> tuple[float, ...]:
        return tuple(float(v) for v in _split(s))

    def seed(s: str) -> int:
        v = int(s)
        if v < 0:
            raise ValueError("seed must be >= 0")
        return v

    kwargs = dict(
        model=get("model", ModelSpec.parse, required=True),
        n_grid=get("n", ints, required=True),
        reps=get("reps", int, required=True),
        seed=get("seed", seed, required=True),
        rho=get("rho", float, 0.6),
        tau=get("tau", float, 1.0),
        threshold_method=get("threshold_method", lambda s: ThresholdMethod(s.strip().lower()),
                             ThresholdMethod.ANALYTIC),
        x_grid=get("x", floats, (1.0,)),
        eps_grid=get("eps", floats, (1.0, 2.0)),
        m_grid=get("m", ints, ()),
        events=get("events", lambda s: tuple(ClusterEvent.parse(e) for e in _split(s, "|")), ()),
        test_functions=get("test_functions", str.strip, "tents12"),
        tasks=get("tasks", lambda s: tuple(t.lower() for t in _split(s)), ("theta",)),
    )
    if "output" in cp:
        kwargs["out"] = cp["output"].get("path", "results")
        kwargs["out_format"] = cp["output"].get("format", "both").strip().lower()
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as exc:
        if exc.line is None and exc.field is not None:
            key = {"n_grid": "n", "x_grid": "x", "eps_grid": "eps", "m_grid": "m", "out_format": "format"}.get(
                exc.field, exc.field)
            sec = "output" if key == "format" else "experiment"
            line = _line_of(text, sec, key) or _line_of(text, sec) or _line_of(text, "experiment")
            raise ConfigError(str(exc).split(": ", 1)[-1], key, line) from exc
        raise
    except (ParameterError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text)


# ----------------------------------------------------------------------------
# result rows


@dataclass(frozen=True)
class Row:
    estimator: str
    params: dict
    value: float
    stderr: float
    reps: int
    seed: int
    oracle: float | None = None
    acceptance: bool = False
    flag: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def z(self) -> float | None:
        if self.oracle is None:
            return None
        diff = self.value - self.oracle
        if self.stderr > 0:
            return diff / self.stderr
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)

    @property
    def param_text(self) -> str:
        return ";".join(f"{k}={_fmt(v)}" for k, v in self.params.items())

    def record(self, config_hash: str = "") -> dict:
        return {
            "estimator": self.estimator,
            "params": self.param_text,
            "value": self.value,
            "stderr": self.stderr,
            "reps": self.reps,
            "seed": self.seed,
            "oracle_value": self.oracle,
            "z_score": self.z,
            "acceptance": self.acceptance,
            "flag": self.flag,
            "config_hash": config_hash,
        }


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _row(name: str, params: dict, est: Estimate, oracle: float | None = None, acceptance: bool = False) -> Row:
    return Row(name, dict(params), float(est.value), float(est.stderr), est.reps, est.seed, oracle,
               acceptance and oracle is not None, est.flag, est.meta)


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UnsupportedModel:
        return None


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _fmt(v)
    return v


def rows_to_csv(rows: list[Row], config_hash: str = "", columns=COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        rec = r.record(config_hash)
        w.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def rows_to_json(rows: list[Row], config_hash: str = "", columns=COLUMNS) -> str:
    recs = [{c: _json_value(r.record(config_hash)[c]) for c in columns} for r in rows]
    return json.dumps(recs, indent=2) + "\n"


def assert_failures(rows: list[Row], z_max: float) -> list[Row]:
    """Acceptance-tagged rows whose ``|z|`` exceeds ``z_max``."""
    return [r for r in rows if r.acceptance and r.z is not None and not abs(r.z) <= z_max]


# ----------------------------------------------------------------------------
# sweeps


def _threshold(model: ModelSpec, n: int, tau: float, method: ThresholdMethod, seed: int) -> float:
    if ThresholdMethod(method) is ThresholdMethod.ANALYTIC:
        return threshold_analytic(model, n, tau).u_n
    pilot = generate_sequence(model, EMPIRICAL_PILOT_FACTOR * n, seed, stream=2)
    return threshold_empirical(pilot, n, tau).u_n


def theta_rows(
    model: ModelSpec,
    n_grid,
    m_grid,
    rho: float = 0.6,
    tau: float = 1.0,
    reps: int = 1000,
    seed: int = 0,
    *,
    threshold_method=ThresholdMethod.ANALYTIC,
    threads: int = 1,
) -> list[Row]:
    """Runs estimates for every ``m``; blocks and direct estimates once per ``n``."""
    oracle = theta_exact(model)
    rows = []
    for n in n_grid:
        u = _threshold(model, n, tau, threshold_method, seed)
        for i, m in enumerate(m_grid):
            res = extremal_index_all(model, n, m, rho, tau, reps, seed, u_n=u, threads=threads)
            rows.append(_row("theta_runs", dict(n=n, m=m, tau=tau), res["runs"], oracle, True))
            if i == 0:
                rows.append(_row("theta_blocks", dict(n=n, rho=rho, tau=tau), res["blocks"], oracle, True))
                rows.append(_row("theta_direct", dict(n=n, tau=tau), res["direct"], oracle, True))
    return rows


def tail_rows(model, n_grid, x_grid, m_grid, rho=0.6, reps=1000, seed=0, *, threads=1) -> list[Row]:
    """``block_tail``, ``telescope_tail`` and their difference against ``theta x^-alpha``."""
    rows = []
    for n in n_grid:
        scheme = make_scheme(model, n, rho)
        for x in x_grid:
            lam = _maybe(limit_lambda_Mx, model, x)
            rows.append(_row("block_tail", dict(n=n, x=x), block_tail(model, scheme, x, reps, seed, threads=threads),
                             lam, True))
            for m in m_grid:
                if m > scheme.r_n:
                    continue
                p = dict(n=n, m=m, x=x)
                tel = telescope_tail(model, scheme, m, x, reps, seed, threads=threads)
                rows.append(_row("telescope_tail", p, tel, lam if m >= model.window else None, True))
                diff = difference_diagnostic(model, scheme, m, x, None, reps, seed, threads=threads)
                rows.append(_row("difference_tail", p, diff))
    return rows


def cluster_rows(model, n_grid, x_grid, m_grid, events, rho=0.6, reps=1000, seed=0, *, threads=1) -> list[Row]:
    """Block and telescoped cluster functionals against ``lambda(M cap M_x)``."""
    rows = []
    for n in n_grid:
        scheme = make_scheme(model, n, rho)
        for ev in events:
            for x in x_grid:
                lam = _maybe(limit_lambda_cluster, model, ev, x)
                rows.append(_row("block_cluster", dict(n=n, x=x, event=str(ev)),
                                 block_cluster(model, scheme, x, ev, reps, seed, threads=threads), lam, True))
                for m in m_grid:
                    if m > scheme.r_n:
                        continue
                    p = dict(n=n, m=m, x=x, event=str(ev))
                    tel = telescope_cluster(model, scheme, m, x, ev, reps, seed, threads=threads)
                    rows.append(_row("telescope_cluster", p, tel, lam if m >= model.window else None, True))
                    diff = difference_diagnostic(model, scheme, m, x, ev, reps, seed, threads=threads)
                    rows.append(_row("difference_cluster", p, diff))
    return rows


def condition_rows(
    model, n_grid, eps_grid, m_grid, functions=None, rho=0.6, reps=1000, seed=0, *, ad1: bool = True, threads=1
) -> list[Row]:
    """(AN), (AC) profile, ``m_0``, (AIM) gap and, with ``reps >= 100``, the (AD-1) gap."""
    rows = []
    ms = sorted(set(range(0, max(m_grid) + 1)) | set(m_grid))
    funcs = tent_family() if functions is None else list(functions)
    for n in n_grid:
        scheme = make_scheme(model, n, rho)
        for eps in eps_grid:
            an = an_diagnostic(model, scheme, eps, reps, seed, threads=threads)
            exact = n * marginal_tail(model, eps * scheme.a_n)
            rows.append(_row("AN", dict(n=n, eps=eps), an, exact, True))
            for m, est in ac_profile(model, scheme, eps, ms, reps, seed, threads=threads).items():
                rows.append(_row("AC", dict(n=n, eps=eps, m=m), est))
        m0 = estimate_m0(model, scheme, eps_grid, max(ms), reps=reps, seed=seed, threads=threads)
        m0_val = float("nan") if m0.m0 is None else float(m0.m0)
        oracle_m0 = None if model.family.value == "armax" else float(model.window)
        rows.append(Row("m0", dict(n=n, tol=m0.tol), m0_val, 0.0, reps, seed, oracle_m0, False,
                        None if m0.found else "NOT_FOUND"))
        u = threshold_analytic(model, n).u_n
        gap = aim_gap(model, n, u, rho, reps, seed, threads=threads)
        rows.append(_row("AIM", dict(n=n, rho=rho), gap, aim_gap_exact(model, n, u, scheme.r_n), True))
        if ad1 and reps >= 100:
            for i, f in enumerate(funcs):
                est = ad1_gap(model, scheme, f, reps, seed, threads=threads)
                exact = _maybe(ad1_gap_exact_iid, model, f, n, scheme.r_n, scheme.a_n)
                rows.append(_row("AD-1", dict(n=n, f=i), est, exact, True))
    return rows


# ----------------------------------------------------------------------------
# plot data


class PlotKind(str, enum.Enum):
    THETA_VS_N = "theta_vs_n"
    GAP_VS_N = "gap_vs_n"
    LAMBDA_VS_X = "lambda_vs_x"


_PLOT_DEFAULTS = {
    PlotKind.THETA_VS_N: (("theta_blocks", "theta_runs", "theta_direct"), "n"),
    PlotKind.GAP_VS_N: (("difference_tail", "difference_cluster", "AIM"), "n"),
    PlotKind.LAMBDA_VS_X: (("block_tail",), "x"),
}


def _trend(ys: list[float]) -> str:
    d = np.diff(ys)
    if d.size == 0:
        return "single point"
    if np.all(d < 0):
        return "decreasing"
    if np.all(d > 0):
        return "increasing"
    return "not monotone"


def emit_plot_data(rows: list[Row], kind: PlotKind | str, estimator: str | None = None) -> str:
    """Whitespace-separated ``x y yerr`` columns for one sweep.

    Rows of the first matching estimator are used; when other parameters vary
    the first combination seen is kept (for ``LAMBDA_VS_X``, the largest ``n``).
    ``GAP_VS_N`` appends a trend comment line.
    """
    kind = PlotKind(kind)
    names, xkey = _PLOT_DEFAULTS[kind]
    if estimator is not None:
        names = (estimator,)
    if not rows:
        raise ValueError("no results to plot")
    chosen = next((nm for nm in names if any(r.estimator == nm for r in rows)), None)
    if chosen is None:
        raise ValueError(f"results contain no {kind.value} sweep (looked for {list(names)})")
    sel = [r for r in rows if r.estimator == chosen and xkey in r.params]
    if kind is PlotKind.LAMBDA_VS_X and any("n" in r.params for r in sel):
        n_max = max(r.params["n"] for r in sel)
        sel = [r for r in sel if r.params.get("n") == n_max]
    others = lambda r: tuple((k, v) for k, v in r.params.items() if k != xkey)
    keep = others(sel[0])
    sel = sorted((r for r in sel if others(r) == keep), key=lambda r: r.params[xkey])
    fixed = " ".join(f"{k}={_fmt(v)}" for k, v in keep)
    lines = [f"# {chosen} {fixed}".rstrip(), f"# {xkey} value stderr"]
    lines += [f"{_fmt(r.params[xkey])} {_fmt(r.value)} {_fmt(r.stderr)}" for r in sel]
    if kind is PlotKind.GAP_VS_N:
        ys = [r.value for r in sel]
        lines.append(f"# trend: {_trend(ys)} over {len(ys)} points, last/first = {_fmt(ys[-1] / ys[0]) if ys[0] else 'nan'}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# run


def collect_rows(config: ExperimentConfig, *, threads: int = 1) -> list[Row]:
    c = config
    rows: list[Row] = []
    if "theta" in c.tasks:
        rows += theta_rows(c.model, c.n_grid, c.m_grid, c.rho, c.tau, c.reps, c.seed,
                           threshold_method=c.threshold_method, threads=threads)
    if "tail" in c.tasks:
        rows += tail_rows(c.model, c.n_grid, c.x_grid, c.m_grid, c.rho, c.reps, c.seed, threads=threads)
    if "cluster" in c.tasks:
        rows += cluster_rows(c.model, c.n_grid, c.x_grid, c.m_grid, c.events, c.rho, c.reps, c.seed,
                             threads=threads)
    if "conditions" in c.tasks:
        rows += condition_rows(c.model, c.n_grid, c.eps_grid, c.m_grid, c.functions(), c.rho, c.reps, c.seed,
                               threads=threads)
    return rows


def manifest(config: ExperimentConfig, files: list[str]) -> dict:
    return {
        "config": config.canonical(),
        "config_hash": config.config_hash,
        "seed": config.seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "files": sorted(files),
    }


def run(
    config: ExperimentConfig,
    *,
    out: str | Path | None = None,
    threads: int = 1,
    assert_z: float | None = None,
) -> int:
    """Run every task of ``config`` and write results, manifest and plot data.

    Returns 0, or 2 when ``assert_z`` is set and an acceptance-tagged row has
    ``|z| > assert_z``. Thread count is not recorded, so outputs do not depend on it.
    """
    out_dir = Path(out if out is not None else config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = collect_rows(config, threads=threads)
    h = config.config_hash
    files = []
    if config.out_format in ("csv", "both"):
        (out_dir / "results.csv").write_text(rows_to_csv(rows, h))
        files.append("results.csv")
    if config.out_format in ("json", "both"):
        (out_dir / "results.json").write_text(rows_to_json(rows, h))
        files.append("results.json")
    for kind in PlotKind:
        try:
            text = emit_plot_data(rows, kind)
        except ValueError:
            continue
        (out_dir / f"{kind.value}.dat").write_text(text)
        files.append(f"{kind.value}.dat")
    (out_dir / "manifest.json").write_text(json.dumps(manifest(config, files), indent=2, sort_keys=True) + "\n")
    if assert_z is not None and assert_failures(rows, assert_z):
        return 2
    return 0
