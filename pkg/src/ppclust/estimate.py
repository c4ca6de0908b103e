"""Monte Carlo estimate record shared by every estimator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Estimate", "DEGENERATE", "INFINITE", "mean_estimate", "batch_means_stderr"]

DEGENERATE = "DEGENERATE"
INFINITE = "INFINITE"


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    reps: int
    seed: int
    flag: str | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def z_score(self, target: float) -> float:
        diff = self.value - target
        if self.stderr > 0:
            return diff / self.stderr
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)

    def within(self, target: float, abs_tol: float = 0.0, k: float = 3.0) -> bool:
        """``|value - target| <= max(abs_tol, k * stderr)``."""
        return abs(self.value - target) <= max(abs_tol, k * self.stderr)


def mean_estimate(values, seed: int, *, flag_zero: bool = False, **meta) -> Estimate:
    """Sample mean with ``sd / sqrt(reps)`` standard error."""
    v = np.asarray(values, dtype=float)
    reps = v.size
    if reps == 0:
        raise ValueError("no replicates")
    if np.all(v == v[0]):
        value, stderr = float(v[0]), 0.0
    else:
        value = float(np.mean(v))
        stderr = float(np.std(v, ddof=1) / math.sqrt(reps))
    flag = DEGENERATE if flag_zero and not np.any(v) else None
    return Estimate(value=value, stderr=stderr, reps=int(reps), seed=int(seed), flag=flag, meta=meta)


def batch_means_stderr(series, batch_len: int) -> float:
    """Standard error of the mean of a dependent series by non-overlapping batch means."""
    s = np.asarray(series, dtype=float)
    batch_len = max(int(batch_len), 1)
    nb = s.size // batch_len
    if nb < 2:
        return 0.0
    means = s[: nb * batch_len].reshape(nb, batch_len).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(nb))
