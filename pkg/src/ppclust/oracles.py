"""Closed-form ground truth for the implemented models.

Limit quantities assume the ``a_n`` normalisation ``n P(X_1 > a_n) = 1``.
Under it the moving-maximum limit is a cluster Poisson process whose clusters
are ``m`` coincident points at a centre ``u`` with centre intensity
``theta * alpha * u^(-alpha-1) du`` and ``theta = 1/m``; the i.i.d. case is the
``m = 1`` Poisson process.

Finite-n probabilities for moving maxima reduce to products of ``F_Y``.
Everything beyond the product formulas is computed two independent ways:

* :func:`cluster_prob_exact` runs a transfer-matrix recursion over the
  categories of the base variables;
* :func:`enumerate_patterns` lists every category string of the base
  variables with its product probability (brute force, size-limited).
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .models import Family, ModelSpec, Tail, base_cdf, _log_base_cdf
from .pointproc import ClusterEvent, ObservableSet, TestFunction

__all__ = [
    "UnsupportedModel",
    "EnumerationLimitError",
    "ExactEvent",
    "LimitOracle",
    "limit_oracle",
    "theta_exact",
    "limit_lambda_Mx",
    "limit_lambda_cluster",
    "limit_laplace",
    "limit_count_law",
    "exact_prob",
    "armax_max_leq_prob",
    "upper_ray",
    "pair_prob_exact",
    "cluster_prob_exact",
    "enumerate_patterns",
    "cluster_prob_enum",
    "marginal_laplace_deficit",
    "aim_gap_exact",
    "ad1_gap_exact_iid",
    "ENUM_LIMIT",
]

ENUM_LIMIT = 2 ** 22
QUAD_TOL = 1e-8


class UnsupportedModel(ValueError):
    """The requested oracle is not available for this model or set shape."""


class EnumerationLimitError(ValueError):
    """Exact enumeration would exceed the pattern budget; use Monte Carlo mode."""


class ExactEvent(str, enum.Enum):
    MAX_LEQ = "max_leq"
    RUNS = "runs"
    BLOCK_TAIL = "block_tail"


def _require_cluster_model(model: ModelSpec) -> int:
    if model.family is Family.ARMAX:
        raise UnsupportedModel("ARMAX limit clusters are not coincident; only theta is available")
    return model.window


def theta_exact(model: ModelSpec) -> float:
    """Extremal index: 1 (i.i.d.), ``1/m`` (moving maxima), ``1 - a^alpha`` (ARMAX)."""
    if model.family is Family.IID:
        return 1.0
    if model.family is Family.MOVING_MAX:
        return 1.0 / model.window_m
    if model.family is Family.ARMAX:
        return 1.0 - model.armax_alpha ** model.alpha
    raise UnsupportedModel(f"unknown family {model.family}")


@dataclass(frozen=True)
class LimitOracle:
    model: ModelSpec
    theta: float
    cluster_size: int | None
    tail_index: float

    def center_intensity(self, x: float) -> float:
        """Mean number of limit clusters with centre beyond ``x``."""
        return self.theta * x ** -self.tail_index


def limit_oracle(model: ModelSpec) -> LimitOracle:
    size = None if model.family is Family.ARMAX else model.window
    return LimitOracle(model=model, theta=theta_exact(model), cluster_size=size, tail_index=model.alpha)


def limit_lambda_Mx(model: ModelSpec, x: float) -> float:
    """``lambda(M_x) = theta * x^(-alpha)``."""
    _require_cluster_model(model)
    if not x > 0:
        raise ValueError("x must be positive")
    if math.isinf(x):
        return 0.0
    return theta_exact(model) * x ** -model.alpha


def upper_ray(obs: ObservableSet) -> float:
    """Lower endpoint ``y`` of a set of the form ``(y, inf]`` (or ``[y, inf]``)."""
    if len(obs.intervals) == 1:
        iv = obs.intervals[0]
        if iv.lo > 0 and iv.hi == math.inf and iv.hi_closed:
            return iv.lo
    raise UnsupportedModel(f"set {obs} is not a one-sided ray (y, inf]")


def limit_lambda_cluster(model: ModelSpec, event: ClusterEvent, x: float) -> float:
    """``lambda(M intersect M_x)`` for one-sided constraint sets.

    A limit cluster ``m delta_u`` lies in ``M`` iff ``u > y_i`` and ``k_i <= m``
    for every constraint, and in ``M_x`` iff ``u > x``.
    """
    m = _require_cluster_model(model)
    ys = [upper_ray(b) for b in event.sets]
    if any(k > m for k in event.ks):
        return 0.0
    return limit_lambda_Mx(model, max([x, *ys]))


def limit_laplace(model: ModelSpec, f: TestFunction) -> float:
    """``exp{-int (1 - e^{-m f(y)}) theta alpha y^(-alpha-1) dy}``.

    Integrated in ``t = 1/y``, where the intensity becomes ``theta alpha t^(alpha-1) dt``.
    """
    m = _require_cluster_model(model)
    theta, alpha = theta_exact(model), model.alpha
    xs = np.asarray(f.xs)
    if xs[-1] <= 0:
        return 1.0
    lo, hi = max(xs[0], 0.0), xs[-1]
    if f.is_zero:
        return 1.0

    def integrand(t: float) -> float:
        return -math.expm1(-m * float(f(1.0 / t))) * theta * alpha * t ** (alpha - 1.0)

    t_lo, t_hi = 1.0 / hi, 1.0 / lo
    pts = sorted({1.0 / v for v in xs if v > 0 and t_lo < 1.0 / v < t_hi})
    val, err = integrate.quad(integrand, t_lo, t_hi, points=pts or None, epsabs=1e-11, epsrel=1e-11, limit=200)
    if not err <= QUAD_TOL:
        raise RuntimeError(f"quadrature did not converge: value={val}, error estimate={err}")
    return math.exp(-val)


def limit_count_law(model: ModelSpec, obs: ObservableSet, tail_eps: float = 1e-16) -> np.ndarray:
    """Limit pmf of ``N((x, inf])``.

    I.i.d.: Poisson(``x^-alpha``). Moving maxima: ``m K`` with ``K ~ Poisson(x^-alpha / m)``.
    Returns ``pmf[j] = P(N = j)`` truncated once the Poisson tail drops below ``tail_eps``.
    """
    m = _require_cluster_model(model)
    x = upper_ray(obs)
    mean_clusters = limit_lambda_Mx(model, x)
    if mean_clusters == 0:
        return np.array([1.0])
    kmax = int(stats.poisson.isf(tail_eps, mean_clusters)) + 1
    pk = stats.poisson.pmf(np.arange(kmax + 1), mean_clusters)
    pmf = np.zeros(m * kmax + 1)
    pmf[::m] = pk
    return pmf


# ----------------------------------------------------------------------------
# exact finite-n probabilities


def _log_f(model: ModelSpec, u: float) -> float:
    if not u > 0:
        raise ValueError("threshold must be positive")
    return _log_base_cdf(model, u) if math.isfinite(u) else 0.0


def exact_prob(model: ModelSpec, kind: ExactEvent | str, k: int, u: float) -> float:
    """Exact probabilities for i.i.d. and moving-maximum sequences at level ``u``.

    * ``MAX_LEQ(k)``: ``P(max_{j<=k} X_j <= u) = F^(k+m-1)``
    * ``RUNS(k)``: ``P(max_{j<k} X_j <= u, X_k > u)``; ``F^(k+m-2) (1-F)`` for ``k >= 2``,
      ``1 - F^m`` for ``k = 1``
    * ``BLOCK_TAIL(k)``: ``P(max_{j<=k} X_j > u) = 1 - F^(k+m-1)``
    """
    kind = ExactEvent(kind)
    w = _require_cluster_model(model)
    if int(k) != k or k < (0 if kind is ExactEvent.MAX_LEQ else 1):
        raise ValueError(f"invalid event parameter {k}")
    lf = _log_f(model, u)
    if kind is ExactEvent.MAX_LEQ:
        return 1.0 if k == 0 else math.exp((k + w - 1) * lf)
    if kind is ExactEvent.BLOCK_TAIL:
        return -math.expm1((k + w - 1) * lf)
    if k == 1:
        return -math.expm1(w * lf)
    return math.exp((k + w - 2) * lf) * -math.expm1(lf)


def armax_max_leq_prob(model: ModelSpec, n: int, u: float) -> float:
    """Exact ``P(max_{j<=n} X_j <= u)`` for ARMAX started at stationarity.

    ``max_j X_j <= u`` iff ``a X_0 <= u`` and ``c Z_j <= u`` for ``j = 1..n``.
    """
    if model.family is not Family.ARMAX:
        raise UnsupportedModel("ARMAX only")
    a, al = model.armax_alpha, model.alpha
    c_pow = 1.0 - a ** al
    return math.exp(-(a ** al + n * c_pow) * u ** -al)


def _levels(event: ClusterEvent, scale: float) -> tuple[np.ndarray, list[int]]:
    """Distinct unscaled levels and, per constraint, the 1-based level rank."""
    ys = [upper_ray(b) for b in event.sets]
    levels = np.array(sorted(set(ys))) * scale
    ranks = [int(np.searchsorted(levels, y * scale)) + 1 for y in ys]
    return levels, ranks


def _category_probs(model: ModelSpec, levels: np.ndarray) -> np.ndarray:
    cdf = np.concatenate([[0.0], base_cdf(model, levels), [1.0]])
    return np.diff(cdf)


def pair_prob_exact(model: ModelSpec, b1: ObservableSet, b2: ObservableSet, lag: int, scale: float = 1.0) -> float:
    """``P(X_{1,n} in B_1, X_{1+lag,n} in B_2)`` for one-sided sets, ``X_{j,n} = X_j/scale``."""
    w = _require_cluster_model(model)
    t1, t2 = upper_ray(b1) * scale, upper_ray(b2) * scale
    f1, f2 = float(base_cdf(model, t1)), float(base_cdf(model, t2))
    o = max(0, w - abs(int(lag)))
    joint = f1 ** (w - o) * f2 ** (w - o) * min(f1, f2) ** o
    return 1.0 - f1 ** w - f2 ** w + joint


def cluster_prob_exact(model: ModelSpec, event: ClusterEvent, q: int, scale: float = 1.0) -> float:
    """``P(N_{q,n} in M)`` by a transfer-matrix recursion over base-variable categories.

    The state holds the categories of the last ``m-1`` base variables and the
    constraint counts capped at ``k_i``.
    """
    w = _require_cluster_model(model)
    if q < 0:
        raise ValueError("q must be nonnegative")
    levels, ranks = _levels(event, scale)
    ks = event.ks
    p = _category_probs(model, levels)
    states: dict[tuple, float] = {((), (0,) * len(ks)): 1.0}
    for _ in range(q + w - 1):
        nxt: dict[tuple, float] = defaultdict(float)
        for (win, cnt), pr in states.items():
            for c, pc in enumerate(p):
                if pc == 0.0:
                    continue
                full = win + (c,)
                if len(full) == w:
                    xc = max(full)
                    cnt2 = tuple(min(ci + (xc >= ri), ki) for ci, ri, ki in zip(cnt, ranks, ks))
                    nxt[(full[1:], cnt2)] += pr * pc
                else:
                    nxt[(full, cnt)] += pr * pc
        states = nxt
    return float(sum(pr for (_, cnt), pr in states.items() if cnt == ks))


def enumerate_patterns(model: ModelSpec, levels: np.ndarray, q: int, limit: int = ENUM_LIMIT):
    """Every category string of the ``q + m - 1`` base variables.

    Returns ``(x_cat, prob)``: ``x_cat[p, j]`` is the number of ``levels`` that
    ``X_{j+1}`` exceeds under pattern ``p`` and ``prob[p]`` its probability.
    """
    w = _require_cluster_model(model)
    levels = np.sort(np.asarray(levels, dtype=float))
    base = levels.size + 1
    length = q + w - 1
    total = base ** length
    if total > limit:
        raise EnumerationLimitError(
            f"{total} patterns exceed the enumeration budget {limit}; use Monte Carlo mode"
        )
    p = _category_probs(model, levels)
    idx = np.arange(total, dtype=np.int64)
    cats = np.empty((total, length), dtype=np.int8)
    prob = np.ones(total)
    for t in range(length):
        digit = (idx // base ** t) % base
        cats[:, t] = digit
        prob *= p[digit]
    if q == 0:
        return np.zeros((total, 0), dtype=np.int8), prob
    x_cat = cats[:, :q].copy()
    for s in range(1, w):
        np.maximum(x_cat, cats[:, s:s + q], out=x_cat)
    return x_cat, prob


def cluster_prob_enum(model: ModelSpec, event: ClusterEvent, q: int, scale: float = 1.0) -> float:
    """``P(N_{q,n} in M)`` by brute-force enumeration (independent of the recursion)."""
    levels, ranks = _levels(event, scale)
    x_cat, prob = enumerate_patterns(model, levels, q)
    hit = np.ones(prob.size, dtype=bool)
    for r, k in zip(ranks, event.ks):
        hit &= (x_cat >= r).sum(axis=1) >= k
    return float(prob[hit].sum())


def marginal_laplace_deficit(model: ModelSpec, f: TestFunction, scale: float) -> float:
    """``1 - E exp(-f(X_1 / scale))`` by quadrature against the exact marginal density."""
    w = model.window if model.family is Family.MOVING_MAX else 1
    alpha = model.alpha
    xs = np.asarray(f.xs)
    if xs[-1] <= 0 or f.is_zero:
        return 0.0

    def density(y: float) -> float:
        t = y * scale
        lf = _log_base_cdf(model, t)
        if not math.isfinite(lf):
            return 0.0
        if model.base_tail is Tail.FRECHET:
            dlog = alpha * t ** (-alpha - 1.0)
        else:
            dlog = alpha * t ** (-alpha - 1.0) / (1.0 - t ** -alpha)
        return math.exp(w * lf) * w * dlog * scale

    def integrand(y: float) -> float:
        return -math.expm1(-float(f(y))) * density(y)

    lo = max(xs[0], 0.0)
    pts = [v for v in xs[1:-1] if v > lo]
    val, err = integrate.quad(integrand, lo, xs[-1], points=pts or None, epsabs=0.0, epsrel=1e-12, limit=200)
    if err > 1e-9 * max(abs(val), 1e-300):
        raise RuntimeError(f"quadrature did not converge: value={val}, error estimate={err}")
    return val


def aim_gap_exact(model: ModelSpec, n: int, u: float, r: int) -> float:
    """``|P(max_{j<=n} X_j <= u) - P(max_{j<=r} X_j <= u)^(n // r)|`` in closed form."""
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    k = n // r
    if model.family is Family.ARMAX:
        full, blk = armax_max_leq_prob(model, n, u), armax_max_leq_prob(model, r, u)
    else:
        full = exact_prob(model, ExactEvent.MAX_LEQ, n, u)
        blk = exact_prob(model, ExactEvent.MAX_LEQ, r, u)
    return abs(full - blk ** k)


def ad1_gap_exact_iid(model: ModelSpec, f: TestFunction, n: int, r: int, scale: float) -> float:
    """``|E e^{-N_n(f)} - (E e^{-N_r(f)})^(n // r)|`` for an i.i.d. row, ``q = 1 - E e^{-f(X/scale)}``."""
    if model.family is not Family.IID:
        raise UnsupportedModel("closed form needs an i.i.d. row")
    if not 1 <= r <= n:
        raise ValueError("need 1 <= r <= n")
    lq = math.log1p(-marginal_laplace_deficit(model, f, scale))
    return abs(math.exp(n * lq) - math.exp(r * (n // r) * lq))
