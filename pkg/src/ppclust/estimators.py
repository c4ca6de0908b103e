"""Block and telescoped cluster functionals, and extremal-index estimators.

Rows are ``X_{j,n} = X_j / a_n``. Block quantities use the ``k_n`` disjoint
blocks of length ``r_n`` in each path; telescoped quantities use every window
start ``s = 1..n-m+1`` of a path, with the length-``m`` and length-``m-1``
windows sharing the same start so that

    1{M_{m} > x} - 1{M_{m-1} > x} = 1{max_{j<m} |X_j| <= x, |X_m| > x}

holds window by window. Standard errors come from independent replicate
paths; a single path falls back to batch means with batch length ``10 m``.
"""

from __future__ import annotations

import math

import numpy as np

from .engine import map_paths
from .estimate import DEGENERATE, INFINITE, Estimate, batch_means_stderr, mean_estimate
from .models import ModelSpec, generate_sequence
from .pointproc import ClusterEvent
from .thresholds import ArrayScheme, block_length, threshold_analytic

__all__ = [
    "block_tail",
    "block_cluster",
    "telescope_tail",
    "telescope_cluster",
    "difference_diagnostic",
    "extremal_index_blocks",
    "extremal_index_runs",
    "extremal_index_direct",
    "extremal_index_all",
]


# ----------------------------------------------------------------------------
# per-path statistics


def _cum(mask: np.ndarray) -> np.ndarray:
    out = np.zeros(mask.shape[:-1] + (mask.shape[-1] + 1,), dtype=np.int32)
    np.cumsum(mask, axis=-1, out=out[..., 1:])
    return out


def _window_hits(cums, ks, tail_cum, q: int, width: int) -> np.ndarray:
    """Indicator of ``{N_q in M, M_q > x}`` for window starts ``0..width-1``."""
    shape = tail_cum.shape[:-1] + (width,)
    if q == 0:
        return np.zeros(shape, dtype=bool)
    hit = tail_cum[..., q:q + width] - tail_cum[..., :width] >= 1
    for c, k in zip(cums, ks):
        hit &= c[..., q:q + width] - c[..., :width] >= k
    return hit


def _telescope_series(x: np.ndarray, event: ClusterEvent | None, x_thr: float, m: int) -> np.ndarray:
    """Per-window ``1{N_m in M, M_m > x} - 1{N_{m-1} in M, M_{m-1} > x}`` (int8)."""
    n = x.shape[-1]
    width = n - m + 1
    tail_cum = _cum(np.abs(x) > x_thr)
    cons = event.constraints if event is not None else ()
    cums = [_cum(b.contains(x)) for b, _ in cons]
    ks = [k for _, k in cons]
    hm = _window_hits(cums, ks, tail_cum, m, width)
    hm1 = _window_hits(cums, ks, tail_cum, m - 1, width)
    return hm.astype(np.int8) - hm1.astype(np.int8)


def _block_hits(x: np.ndarray, event: ClusterEvent | None, x_thr: float, r: int, k: int) -> np.ndarray:
    """Number of the ``k`` disjoint blocks with ``N_r in M`` and ``M_r > x``, per path."""
    xb = x[..., : k * r].reshape(x.shape[:-1] + (k, r))
    hit = (np.abs(xb) > x_thr).any(axis=-1)
    if event is not None:
        for b, kk in event.constraints:
            hit &= np.count_nonzero(b.contains(xb), axis=-1) >= kk
    return np.count_nonzero(hit, axis=-1)


def _check_x(x: float) -> None:
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")


def _check_m(m: int, n: int) -> None:
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if m > n:
        raise ValueError(f"window m={m} exceeds the path length n={n}")


def _meta(scheme: ArrayScheme, **extra) -> dict:
    return dict(n=scheme.n, r_n=scheme.r_n, k_n=scheme.k_n, a_n=scheme.a_n, **extra)


# ----------------------------------------------------------------------------
# block functionals


def block_cluster(
    model: ModelSpec,
    scheme: ArrayScheme,
    x: float,
    event: ClusterEvent | None,
    reps: int = 1000,
    seed: int = 0,
    *,
    threads: int = 1,
) -> Estimate:
    """``k_n P(N_{r_n,n} in M, M_{r_n,n} > x)`` from the disjoint blocks of each path.

    ``event=None`` drops the cluster constraint, giving :func:`block_tail`.
    """
    _check_x(x)
    a, r, k = scheme.a_n, scheme.r_n, scheme.k_n
    counts = map_paths(model, scheme.n, reps, seed, lambda b: _block_hits(b / a, event, x, r, k), threads=threads)
    # k_n * (hits / k_n) per path
    return mean_estimate(counts, seed, flag_zero=True, **_meta(scheme, x=x, event=str(event)))


def block_tail(
    model: ModelSpec, scheme: ArrayScheme, x: float, reps: int = 1000, seed: int = 0, *, threads: int = 1
) -> Estimate:
    """``k_n P(M_{r_n,n} > x)``."""
    return block_cluster(model, scheme, x, None, reps, seed, threads=threads)


# ----------------------------------------------------------------------------
# telescoped functionals


def telescope_cluster(
    model: ModelSpec,
    scheme: ArrayScheme,
    m: int,
    x: float,
    event: ClusterEvent | None,
    reps: int = 1000,
    seed: int = 0,
    *,
    threads: int = 1,
) -> Estimate:
    """``n [P(N_{m,n} in M, M_{m,n} > x) - P(N_{m-1,n} in M, M_{m-1,n} > x)]``.

    The sign is kept: a true difference of 0 can come out slightly negative.
    """
    _check_x(x)
    n, a = scheme.n, scheme.a_n
    _check_m(m, n)
    width = n - m + 1
    meta = _meta(scheme, m=m, x=x, event=str(event))
    if reps == 1:
        series = _telescope_series(generate_sequence(model, n, seed) / a, event, x, m).astype(float)
        return Estimate(
            value=n * float(series.mean()),
            stderr=n * batch_means_stderr(series, 10 * m),
            reps=1,
            seed=seed,
            flag=None if series.any() else DEGENERATE,
            meta=meta,
        )

    def stats(b: np.ndarray) -> np.ndarray:
        d = _telescope_series(b / a, event, x, m)
        return np.stack([d.sum(axis=-1), np.count_nonzero(d, axis=-1)], axis=-1)

    out = map_paths(model, n, reps, seed, stats, threads=threads)
    est = mean_estimate(out[:, 0] * (n / width), seed, **meta)
    if not np.any(out[:, 1]):
        est = Estimate(est.value, est.stderr, est.reps, est.seed, DEGENERATE, est.meta)
    return est


def telescope_tail(
    model: ModelSpec, scheme: ArrayScheme, m: int, x: float, reps: int = 1000, seed: int = 0, *, threads: int = 1
) -> Estimate:
    """``n P(max_{j<m} |X_{j,n}| <= x, |X_{m,n}| > x)``."""
    return telescope_cluster(model, scheme, m, x, None, reps, seed, threads=threads)


def difference_diagnostic(
    model: ModelSpec,
    scheme: ArrayScheme,
    m: int,
    x: float,
    event: ClusterEvent | None = None,
    reps: int = 1000,
    seed: int = 0,
    *,
    threads: int = 1,
) -> Estimate:
    """``|block functional - telescoped functional|`` on common paths.

    ``event=None`` is the tail variant. ``meta['signed']`` keeps the signed
    difference (block minus telescoped).
    """
    _check_x(x)
    n, a, r, k = scheme.n, scheme.a_n, scheme.r_n, scheme.k_n
    if not 1 <= m <= r:
        raise ValueError(f"need 1 <= m <= r_n, got m={m}, r_n={r}")
    width = n - m + 1

    def stats(b: np.ndarray) -> np.ndarray:
        xs = b / a
        blk = _block_hits(xs, event, x, r, k)
        tel = _telescope_series(xs, event, x, m).sum(axis=-1) * (n / width)
        return np.stack([blk, tel], axis=-1)

    out = map_paths(model, n, reps, seed, stats, threads=threads)
    d = mean_estimate(out[:, 0] - out[:, 1], seed)
    blk = mean_estimate(out[:, 0], seed)
    tel = mean_estimate(out[:, 1], seed)
    return Estimate(
        value=abs(d.value),
        stderr=d.stderr,
        reps=reps,
        seed=seed,
        meta=_meta(scheme, m=m, x=x, event=str(event), signed=d.value, block=blk.value,
                   block_stderr=blk.stderr, telescope=tel.value, telescope_stderr=tel.stderr),
    )


# ----------------------------------------------------------------------------
# extremal index


def _theta_stats(b: np.ndarray, u: float, m: int, r: int, k: int) -> np.ndarray:
    """Per path: backward runs count, exceeding blocks, max <= u, exceedances, forward runs."""
    n = b.shape[-1]
    width = n - m + 1
    e = b > u
    c = _cum(e)
    quiet_before = c[..., m - 1:m - 1 + width] - c[..., :width] == 0
    runs = np.count_nonzero(quiet_before & e[..., m - 1:], axis=-1)
    quiet_after = c[..., m:m + width] - c[..., 1:1 + width] == 0
    fwd = np.count_nonzero(quiet_after & e[..., :width], axis=-1)
    exc = np.count_nonzero(e[..., :width], axis=-1)
    blocks = np.count_nonzero(e[..., : k * r].reshape(b.shape[:-1] + (k, r)).any(axis=-1), axis=-1)
    below = c[..., -1] == 0
    return np.stack([runs, blocks, below, exc, fwd], axis=-1).astype(float)


def _direct(below: np.ndarray, tau: float, seed: int, meta: dict) -> Estimate:
    reps = below.size
    p = float(below.mean())
    if p == 0.0:
        return Estimate(math.inf, math.inf, reps, seed, INFINITE, meta)
    if p == 1.0:
        return Estimate(0.0, 0.0, reps, seed, DEGENERATE, meta)
    se = math.sqrt(p * (1 - p) / reps) / (p * tau)
    return Estimate(-math.log(p) / tau, se, reps, seed, None, meta)


def _ratio(num: np.ndarray, den: np.ndarray, seed: int, meta: dict) -> Estimate:
    reps = num.size
    total = den.sum()
    if total == 0:
        return Estimate(0.0, 0.0, reps, seed, DEGENERATE, meta)
    ratio = float(num.sum() / total)
    resid = num - ratio * den
    se = math.sqrt(float(np.sum(resid ** 2)) / max(reps * (reps - 1), 1)) / float(den.mean()) if reps > 1 else 0.0
    return Estimate(ratio, se, reps, seed, None, meta)


def extremal_index_all(
    model: ModelSpec,
    n: int,
    m: int,
    rho: float = 0.6,
    tau: float = 1.0,
    reps: int = 1000,
    seed: int = 0,
    *,
    u_n: float | None = None,
    threads: int = 1,
) -> dict[str, Estimate]:
    """Runs, blocks and direct estimates from the same paths.

    Keys: ``runs``, ``runs_conditional``, ``blocks``, ``direct``, and the
    paired differences ``runs_minus_blocks`` and ``blocks_minus_direct``
    (the latter with a delta-method standard error on common paths).
    ``u_n`` overrides the analytic threshold.
    """
    _check_m(m, n)
    u = threshold_analytic(model, n, tau).u_n if u_n is None else float(u_n)
    r = block_length(n, rho)
    k = n // r
    width = n - m + 1
    meta = dict(n=n, m=m, rho=rho, r_n=r, k_n=k, tau=tau, u_n=u)
    out = map_paths(model, n, reps, seed, lambda b: _theta_stats(b, u, m, r, k), threads=threads)
    runs_v = out[:, 0] * (n / width) / tau
    blocks_v = out[:, 1] / tau
    res = {
        "runs": mean_estimate(runs_v, seed, **meta),
        "blocks": mean_estimate(blocks_v, seed, flag_zero=True, **meta),
        "direct": _direct(out[:, 2].astype(bool), tau, seed, meta),
        "runs_conditional": _ratio(out[:, 4], out[:, 3], seed, meta),
        "runs_minus_blocks": mean_estimate(runs_v - blocks_v, seed, **meta),
    }
    p = float(out[:, 2].mean())
    if 0.0 < p < 1.0:
        # influence of -log(p)/tau for path i: -(1{below_i} - p) / (p tau)
        infl = blocks_v + (out[:, 2] - p) / (p * tau)
        diff = mean_estimate(infl, seed, **meta)
        res["blocks_minus_direct"] = Estimate(
            res["blocks"].value - res["direct"].value, diff.stderr, reps, seed, None, meta
        )
    return res


def extremal_index_blocks(
    model: ModelSpec, n: int, rho: float = 0.6, tau: float = 1.0, reps: int = 1000, seed: int = 0, *, threads: int = 1
) -> Estimate:
    """``k_n`` times the fraction of blocks whose maximum exceeds ``u_n``, over ``tau``."""
    return extremal_index_all(model, n, 1, rho, tau, reps, seed, threads=threads)["blocks"]


def extremal_index_runs(
    model: ModelSpec,
    n: int,
    m: int,
    tau: float = 1.0,
    reps: int = 1000,
    seed: int = 0,
    *,
    conditional: bool = False,
    threads: int = 1,
) -> Estimate:
    """``n P(max_{j<m} X_j <= u_n, X_m > u_n) / tau`` by sliding windows.

    With ``conditional=True`` returns the ratio estimate of
    ``P(max_{2<=j<=m} X_j <= u_n | X_1 > u_n)``.
    """
    if reps == 1 and not conditional:
        _check_m(m, n)
        u = threshold_analytic(model, n, tau).u_n
        x = generate_sequence(model, n, seed)
        e = x > u
        c = _cum(e)
        width = n - m + 1
        series = ((c[m - 1:m - 1 + width] - c[:width] == 0) & e[m - 1:]).astype(float)
        return Estimate(n * float(series.mean()) / tau, n * batch_means_stderr(series, 10 * m) / tau,
                        1, seed, None if series.any() else DEGENERATE, dict(n=n, m=m, tau=tau, u_n=u))
    key = "runs_conditional" if conditional else "runs"
    return extremal_index_all(model, n, m, 0.6, tau, reps, seed, threads=threads)[key]


def extremal_index_direct(
    model: ModelSpec, n: int, tau: float = 1.0, reps: int = 1000, seed: int = 0, *, threads: int = 1
) -> Estimate:
    """``-log(fraction of paths with max <= u_n) / tau``."""
    if reps < 100:
        raise ValueError("the direct estimator needs reps >= 100")
    return extremal_index_all(model, n, 1, 0.6, tau, reps, seed, threads=threads)["direct"]
