"""Normalising thresholds ``u_n`` with ``n P(X_1 > u_n) = tau`` and the block scheme."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .models import Family, ModelSpec, Tail, base_quantile, marginal_tail

__all__ = [
    "ThresholdMethod",
    "ThresholdPlan",
    "ArrayScheme",
    "threshold_analytic",
    "threshold_root",
    "threshold_empirical",
    "scaling_a_n",
    "make_scheme",
    "block_length",
]


class ThresholdMethod(str, enum.Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"


@dataclass(frozen=True)
class ThresholdPlan:
    tau: float
    n: int
    u_n: float
    method: ThresholdMethod


def _check(n: int, tau: float) -> None:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if tau >= n:
        raise ValueError(f"no valid threshold: tau={tau} >= n={n} would need P(X_1 > u) >= 1")


def _neg_power(model: ModelSpec, n: int, tau: float) -> float:
    """``u^{-alpha}`` solving ``n P(X_1 > u) = tau`` in closed form."""
    p = tau / n
    log_keep = math.log1p(-p)  # log P(X_1 <= u)
    m = model.window if model.family is Family.MOVING_MAX else 1
    if model.base_tail is Tail.FRECHET:
        return -log_keep / m
    return -math.expm1(log_keep / m)


def threshold_analytic(model: ModelSpec, n: int, tau: float = 1.0) -> ThresholdPlan:
    """Exact threshold by inverting the marginal tail in closed form."""
    _check(n, tau)
    u = _neg_power(model, n, tau) ** (-1.0 / model.alpha)
    return ThresholdPlan(tau=float(tau), n=int(n), u_n=u, method=ThresholdMethod.ANALYTIC)


def threshold_root(model: ModelSpec, n: int, tau: float = 1.0, rtol: float = 1e-13) -> ThresholdPlan:
    """Same threshold by bracketed root finding on the monotone tail.

    Independent of the closed-form inversion; used to cross-check it.
    """
    _check(n, tau)
    target = math.log(tau / n)

    def g(u: float) -> float:
        tail = marginal_tail(model, u)
        return (math.log(tail) if tail > 0 else -math.inf) - target

    lo = base_quantile(model, 0.5)
    while g(lo) < 0:
        lo /= 2.0
    hi = lo * 2.0
    while g(hi) > 0:
        hi *= 2.0
    u = brentq(g, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500)
    return ThresholdPlan(tau=float(tau), n=int(n), u_n=float(u), method=ThresholdMethod.ANALYTIC)


def scaling_a_n(model: ModelSpec, n: int) -> float:
    """``a_n`` with ``n P(|X_1| > a_n) = 1`` (all models are positive)."""
    if n < 2:
        raise ValueError(f"scaling needs n >= 2, got {n}")
    return threshold_analytic(model, n, 1.0).u_n


def threshold_empirical(sample, n: int, tau: float = 1.0) -> ThresholdPlan:
    """Empirical ``(1 - tau/n)``-quantile of ``sample``.

    Returns the smallest order statistic exceeded strictly by at most
    ``floor(tau * len(sample) / n)`` sample points.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    size = x.size
    if not tau > 0 or n < 1:
        raise ValueError("need n >= 1 and tau > 0")
    if size < n / tau:
        raise ValueError(f"sample of {size} points is too short; need at least n/tau = {n / tau:g}")
    if x[0] == x[-1]:
        raise ValueError("degenerate sample: all values equal, no threshold separates exceedances")
    allowed = math.floor(tau * size / n + 1e-12)
    if allowed >= size:
        raise ValueError("threshold would not be exceeded by the sample")
    u = float(x[size - 1 - allowed])
    return ThresholdPlan(tau=float(tau), n=int(n), u_n=u, method=ThresholdMethod.EMPIRICAL)


def block_length(n: int, rho: float) -> int:
    """``r_n = ceil(n^rho)``, robust to ``n^rho`` landing a hair off an integer."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    v = n ** rho
    nearest = round(v)
    r = nearest if abs(v - nearest) <= 1e-9 * max(1.0, v) else math.ceil(v)
    return int(min(max(r, 1), n))


@dataclass(frozen=True)
class ArrayScheme:
    """Triangular-array bookkeeping for one row length ``n``."""

    n: int
    rho: float
    r_n: int
    k_n: int
    a_n: float

    def __post_init__(self) -> None:
        if not (1 <= self.r_n <= self.n and self.k_n >= 1 and self.k_n * self.r_n <= self.n):
            raise ValueError(f"inconsistent scheme {self}")


def make_scheme(model: ModelSpec, n: int, rho: float = 0.6, a_n: float | None = None) -> ArrayScheme:
    r = block_length(n, rho)
    return ArrayScheme(
        n=int(n),
        rho=float(rho),
        r_n=r,
        k_n=n // r,
        a_n=scaling_a_n(model, n) if a_n is None else float(a_n),
    )
