"""Monte Carlo diagnostics for the asymptotic conditions on the array.

Rare events of probability ``O(1/n)`` are estimated by within-path
frequencies (effective sample about ``n`` per path) and replicated over
independent paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import map_paths
from .estimate import Estimate, mean_estimate
from .models import ModelSpec
from .pointproc import TestFunction, tent_family
from .thresholds import ArrayScheme, block_length

__all__ = [
    "an_diagnostic",
    "ad1_gap",
    "ac_sum",
    "ac_profile",
    "estimate_m0",
    "M0Result",
    "aim_gap",
    "AD1_FAMILY",
    "DEFAULT_EPS_GRID",
    "DEFAULT_M0_TOL",
]

AD1_FAMILY = "tents12"
DEFAULT_EPS_GRID = (1.0, 2.0)
DEFAULT_M0_TOL = 0.05
_PAIR_MATRIX_MAX = 4000


def an_diagnostic(
    model: ModelSpec, scheme: ArrayScheme, eps: float, reps: int = 1000, seed: int = 0, *, threads: int = 1
) -> Estimate:
    """``n P(|X_{1,n}| > eps)`` as the mean per-path exceedance count."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    thr = eps * scheme.a_n
    counts = map_paths(model, scheme.n, reps, seed, lambda b: np.count_nonzero(np.abs(b) > thr, axis=-1),
                       threads=threads)
    return mean_estimate(counts, seed, condition="AN", eps=eps, n=scheme.n)


def ad1_gap(
    model: ModelSpec,
    scheme: ArrayScheme,
    f: TestFunction,
    reps: int = 1000,
    seed: int = 0,
    *,
    threads: int = 1,
) -> Estimate:
    """``|E exp(-N_n(f)) - (E exp(-N_{r_n,n}(f)))^{k_n}|``.

    The full-row term uses stream 0, the block term independent paths from
    stream 1 (each contributing the mean over its ``k_n`` disjoint blocks).
    """
    if reps < 100:
        raise ValueError("ad1_gap needs reps >= 100")
    n, a, r, k = scheme.n, scheme.a_n, scheme.r_n, scheme.k_n

    def full(b: np.ndarray) -> np.ndarray:
        return np.exp(-f(b / a).sum(axis=-1))

    def blocks(b: np.ndarray) -> np.ndarray:
        fb = f(b[..., : k * r] / a).reshape(b.shape[:-1] + (k, r)).sum(axis=-1)
        return np.exp(-fb).mean(axis=-1)

    lf = mean_estimate(map_paths(model, n, reps, seed, full, stream=0, threads=threads), seed)
    lb = mean_estimate(map_paths(model, n, reps, seed, blocks, stream=1, threads=threads), seed)
    power = lb.value ** k
    power_se = k * lb.value ** (k - 1) * lb.stderr
    return Estimate(
        value=abs(lf.value - power),
        stderr=math.hypot(lf.stderr, power_se),
        reps=reps,
        seed=seed,
        meta=dict(condition="AD-1", f=str(f), n=n, r_n=r, k_n=k, full=lf.value, block=lb.value,
                  block_power=power),
    )


def _pair_sum(idx: np.ndarray, n: int, lags: list[int], r: int) -> np.ndarray:
    """``sum_{L} n * #{pairs at lag L} / (n - L)`` restricted to lags ``>= L0``, for each ``L0`` in ``lags``."""
    out = np.zeros(len(lags))
    if idx.size == 0:
        return out
    if idx.size <= _PAIR_MATRIX_MAX:
        d = idx[None, :] - idx[:, None]
        d = d[(d >= 0) & (d < r)]
    else:
        e = np.zeros(n, dtype=bool)
        e[idx] = True
        d = np.concatenate([np.full(np.count_nonzero(e[: n - L] & e[L:]), L) for L in range(r)])
    w = n / (n - d)
    for j, l0 in enumerate(lags):
        out[j] = w[d >= l0].sum()
    return out


def ac_profile(
    model: ModelSpec,
    scheme: ArrayScheme,
    eps: float,
    ms,
    reps: int = 500,
    seed: int = 0,
    *,
    threads: int = 1,
) -> dict[int, Estimate]:
    """:func:`ac_sum` for several ``m`` on the same paths."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    ms = [int(m) for m in ms]
    if any(m < 0 for m in ms):
        raise ValueError("m must be >= 0")
    n, r, thr = scheme.n, scheme.r_n, eps * scheme.a_n

    def stats(b: np.ndarray) -> np.ndarray:
        return np.stack([_pair_sum(np.flatnonzero(np.abs(row) > thr), n, ms, r) for row in b])

    out = map_paths(model, n, reps, seed, stats, threads=threads)
    return {
        m: mean_estimate(out[:, j], seed, condition="AC", eps=eps, m=m, n=n, r_n=r)
        for j, m in enumerate(ms)
    }


def ac_sum(
    model: ModelSpec,
    scheme: ArrayScheme,
    eps: float,
    m: int,
    reps: int = 500,
    seed: int = 0,
    *,
    threads: int = 1,
) -> Estimate:
    """``n sum_{j=m+1}^{r_n} P(|X_{1,n}| > eps, |X_{j,n}| > eps)``.

    Each lag ``L = j - 1`` is estimated by the pair frequency over the
    ``n - L`` pairs of a path.
    """
    return ac_profile(model, scheme, eps, [m], reps, seed, threads=threads)[int(m)]


@dataclass(frozen=True)
class M0Result:
    m0: int | None
    tol: float
    eps_grid: tuple[float, ...]
    table: dict = field(compare=False)

    @property
    def found(self) -> bool:
        return self.m0 is not None


def estimate_m0(
    model: ModelSpec,
    scheme: ArrayScheme,
    eps_grid=DEFAULT_EPS_GRID,
    m_max: int = 5,
    tol: float = DEFAULT_M0_TOL,
    reps: int = 500,
    seed: int = 0,
    *,
    threads: int = 1,
) -> M0Result:
    """Smallest ``m <= m_max`` with ``ac_sum <= tol + 3 stderr`` at every ``eps``; ``m0=None`` if none."""
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    ms = list(range(m_max + 1))
    table = {}
    for eps in eps_grid:
        for m, est in ac_profile(model, scheme, eps, ms, reps, seed, threads=threads).items():
            table[(float(eps), m)] = est
    m0 = None
    for m in ms:
        if all(table[(float(e), m)].value <= tol + 3 * table[(float(e), m)].stderr for e in eps_grid):
            m0 = m
            break
    return M0Result(m0=m0, tol=tol, eps_grid=tuple(float(e) for e in eps_grid), table=table)


def aim_gap(
    model: ModelSpec,
    n: int,
    u_n: float,
    rho: float = 0.6,
    reps: int = 1000,
    seed: int = 0,
    *,
    r_n: int | None = None,
    threads: int = 1,
) -> Estimate:
    """``|P(max_{j<=n} X_j <= u_n) - P(max_{j<=r_n} X_j <= u_n)^{k_n}|``.

    The block probability pools the ``k_n`` disjoint blocks of every path; the
    standard error linearises both terms on the common paths.
    """
    r = block_length(n, rho) if r_n is None else int(r_n)
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r_n <= n")
    k = n // r

    def stats(b: np.ndarray) -> np.ndarray:
        below = ~(b > u_n).any(axis=-1)
        blk = ~(b[..., : k * r].reshape(b.shape[:-1] + (k, r)) > u_n).any(axis=-1)
        return np.stack([below, blk.mean(axis=-1)], axis=-1)

    out = map_paths(model, n, reps, seed, stats, threads=threads)
    p_full = float(out[:, 0].mean())
    p_blk = float(out[:, 1].mean())
    if k == 1 and np.array_equal(out[:, 0], out[:, 1]):
        p_blk = p_full
    power = p_blk ** k
    infl = out[:, 0] - k * p_blk ** (k - 1) * out[:, 1]
    se = float(np.std(infl, ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return Estimate(
        value=abs(p_full - power),
        stderr=se,
        reps=reps,
        seed=seed,
        meta=dict(condition="AIM", n=n, r_n=r, k_n=k, u_n=u_n, full=p_full, block=p_blk, block_power=power),
    )


def ad1_family() -> list[TestFunction]:
    """The documented finite surrogate for ``C_K^+(E)`` used by the (AD-1) diagnostic."""
    return tent_family()
