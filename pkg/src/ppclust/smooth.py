"""C^2 smooth indicator of ``{x_1 >= k_1, ..., x_d >= k_d}`` and the m-block bound.

The indicator is a product of quintic smoothsteps,
``h(x) = prod_i s(x_i - (k_i - 1))``, which equals the lattice indicator on
``Z_+^d`` and satisfies ``h(x) <= 2 min(1, sum x_i)`` on ``R_+^d``.

:func:`mblock_bound_check` compares both sides of

    |E h(S_r) - r E[h(S_m) - h(S_{m-1})]|
        <= m |E h(S_m) + E h(S_{m-1})| + ||D^2 h|| sum_{k=0}^{r-m} sum_{i,l} E|S_k^(i) Y_{k+m}^(l)|

for ``Y_j^(i) = 1{X_{j,n} in B_i}``, either exactly (moving maxima, one-sided
sets) or by Monte Carlo (any model, any sets).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .models import Family, ModelSpec, generate_paths
from .oracles import (
    EnumerationLimitError,
    UnsupportedModel,
    cluster_prob_exact,
    pair_prob_exact,
    upper_ray,
)
from .pointproc import ClusterEvent

__all__ = [
    "SmoothIndicator",
    "BoundCheck",
    "BoundMode",
    "smooth_step",
    "smooth_step_d1",
    "smooth_step_d2",
    "smooth_indicator_eval",
    "d2_sup_bound",
    "indicator_sums",
    "mblock_bound_check",
    "S1_SUP",
    "S2_SUP",
    "EXACT_MAX_LENGTH",
]

S1_SUP = 15.0 / 8.0
S2_SUP = 10.0 / math.sqrt(3.0)
EXACT_MAX_LENGTH = 22


def smooth_step(x):
    """Quintic smoothstep: 0 below 0, ``x^3 (10 - 15x + 6x^2)`` on (0, 1), 1 above 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smooth_step_d1(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return 30.0 * x * x * (1.0 - x) ** 2


def smooth_step_d2(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return 60.0 * x - 180.0 * x * x + 120.0 * x * x * x


@dataclass(frozen=True)
class SmoothIndicator:
    thresholds: tuple[int, ...]
    slack_constant: float = 2.0

    def __post_init__(self) -> None:
        ks = tuple(int(k) for k in self.thresholds)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("thresholds must be positive integers")
        object.__setattr__(self, "thresholds", ks)

    @property
    def d(self) -> int:
        return len(self.thresholds)

    @property
    def d2_bound(self) -> float:
        return d2_sup_bound(self)


def smooth_indicator_eval(h: SmoothIndicator, x) -> np.ndarray | float:
    """``prod_i s(x_i - (k_i - 1))``; ``x`` has trailing dimension ``d``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != h.d:
        raise ValueError(f"expected trailing dimension {h.d}, got {x.shape}")
    shift = np.asarray(h.thresholds, dtype=float) - 1.0
    out = np.prod(smooth_step(x - shift), axis=-1)
    return float(out) if out.ndim == 0 else out


def d2_sup_bound(h: SmoothIndicator) -> float:
    """Bound on every second partial of ``h``.

    Pure partials are ``s''`` times factors in [0, 1]; mixed ones are products of
    two ``s'`` factors. Hence ``max(sup|s''|, sup|s'|^2)`` when ``d >= 2``.
    """
    return S2_SUP if h.d == 1 else max(S2_SUP, S1_SUP ** 2)


def indicator_sums(x_scaled: np.ndarray, event: ClusterEvent) -> np.ndarray:
    """Partial sums ``S_0, ..., S_r`` of ``Y_j^(i) = 1{x_j in B_i}``; shape ``(..., r+1, d)``."""
    y = np.stack([b.contains(x_scaled) for b in event.sets], axis=-1).astype(np.int64)
    zeros = np.zeros(y.shape[:-2] + (1, y.shape[-1]), dtype=np.int64)
    return np.concatenate([zeros, np.cumsum(y, axis=-2)], axis=-2)


class BoundMode(str, enum.Enum):
    EXACT = "exact"
    MC = "mc"


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    stderr: float
    first_term: float
    pair_sum: float
    d2_bound: float


def mblock_bound_check(
    model: ModelSpec,
    scale: float,
    event: ClusterEvent,
    m: int,
    r: int,
    mode: BoundMode | str = BoundMode.EXACT,
    reps: int = 10_000,
    seed: int = 0,
) -> BoundCheck:
    """Evaluate both sides of the m-block bound for ``h`` built from ``event``.

    ``scale`` is the normalising constant: ``X_{j,n} = X_j / scale``.
    Exact mode needs an i.i.d. or moving-maximum model, one-sided sets and
    ``r + m_window - 1 <= 22``.
    """
    mode = BoundMode(mode)
    if not 1 <= m <= r:
        raise ValueError(f"need 1 <= m <= r, got m={m}, r={r}")
    h = SmoothIndicator(event.ks)
    c2 = d2_sup_bound(h)
    if mode is BoundMode.EXACT:
        return _exact_check(model, scale, event, m, r, c2)
    return _mc_check(model, scale, event, m, r, c2, h, reps, seed)


def _exact_check(model, scale, event, m, r, c2) -> BoundCheck:
    if model.family is Family.ARMAX:
        raise UnsupportedModel("exact mode covers i.i.d. and moving-maximum models only")
    if r + model.window - 1 > EXACT_MAX_LENGTH:
        raise EnumerationLimitError(
            f"r + window - 1 = {r + model.window - 1} exceeds {EXACT_MAX_LENGTH}; use --mode mc"
        )
    for b in event.sets:
        upper_ray(b)
    eh_r = cluster_prob_exact(model, event, r, scale)
    eh_m = cluster_prob_exact(model, event, m, scale)
    eh_m1 = cluster_prob_exact(model, event, m - 1, scale)
    lhs = abs(eh_r - r * (eh_m - eh_m1))
    first = m * abs(eh_m + eh_m1)
    pair = 0.0
    sets = event.sets
    for k in range(0, r - m + 1):
        for j in range(1, k + 1):
            lag = k + m - j
            for bi in sets:
                for bl in sets:
                    pair += pair_prob_exact(model, bi, bl, lag, scale)
    rhs = first + c2 * pair
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs), stderr=0.0,
                      first_term=first, pair_sum=pair, d2_bound=c2)


def _mc_check(model, scale, event, m, r, c2, h, reps, seed) -> BoundCheck:
    if reps < 2:
        raise ValueError("Monte Carlo mode needs at least 2 replicates")
    x = generate_paths(model, r, seed, range(reps)) / scale
    s = indicator_sums(x, event)  # (reps, r+1, d)
    y = s[:, 1:, :] - s[:, :-1, :]  # Y_1..Y_r at index 0..r-1
    h_r = smooth_indicator_eval(h, s[:, r, :])
    h_m = smooth_indicator_eval(h, s[:, m, :])
    h_m1 = smooth_indicator_eval(h, s[:, m - 1, :])
    z = h_r - r * (h_m - h_m1)
    lhs = abs(float(np.mean(z)))
    stderr = float(np.std(z, ddof=1) / math.sqrt(reps))
    first = m * abs(float(np.mean(h_m) + np.mean(h_m1)))
    pair = 0.0
    for k in range(0, r - m + 1):
        sk = s[:, k, :].sum(axis=-1)
        yk = y[:, k + m - 1, :].sum(axis=-1)
        pair += float(np.mean(sk * yk))
    rhs = first + c2 * pair
    return BoundCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + 3.0 * stderr), stderr=stderr,
                      first_term=first, pair_sum=pair, d2_bound=c2)
