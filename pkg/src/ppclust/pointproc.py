"""Finite point patterns on ``E = [-inf, inf] \\ {0}`` and the sets and functions
used to probe them.

Textual forms::

    ObservableSet   "(1,inf]"   "[-inf,-2)u(2,inf]"
    ClusterEvent    "(1,inf]>=2; [-inf,-1)>=1"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .estimate import Estimate, mean_estimate

__all__ = [
    "Interval",
    "ObservableSet",
    "ClusterEvent",
    "TestFunction",
    "PointPattern",
    "count",
    "max_modulus",
    "in_cluster_event",
    "integrate",
    "laplace_empirical",
    "tent_family",
]

_NUM = r"[+-]?(?:inf|infinity|\d+(?:\.\d*)?(?:e[+-]?\d+)?|\.\d+(?:e[+-]?\d+)?)"
_INTERVAL_RE = re.compile(rf"^\s*([\[(])\s*({_NUM})\s*,\s*({_NUM})\s*([\])])\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = False
    hi_closed: bool = True

    def __post_init__(self) -> None:
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo > self.hi or (self.lo == self.hi and not (self.lo_closed and self.hi_closed)):
            raise ValueError(f"empty interval {self}")
        if not (self.lo > 0 or self.hi < 0):
            raise ValueError(f"interval {self} is not bounded away from 0")

    @property
    def gap(self) -> float:
        return self.lo if self.lo > 0 else -self.hi

    def contains(self, v: np.ndarray) -> np.ndarray:
        left = (v >= self.lo) if self.lo_closed else (v > self.lo)
        right = (v <= self.hi) if self.hi_closed else (v < self.hi)
        return left & right

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{_fmt(self.lo)},{_fmt(self.hi)}{']' if self.hi_closed else ')'}"


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


class ObservableSet:
    """Finite disjoint union of intervals, bounded away from 0."""

    __slots__ = ("intervals",)

    def __init__(self, intervals: Iterable[Interval]):
        ivs = sorted(intervals, key=lambda iv: (iv.lo, not iv.lo_closed))
        if not ivs:
            raise ValueError("an observable set needs at least one interval")
        for a, b in zip(ivs, ivs[1:]):
            if a.hi > b.lo or (a.hi == b.lo and a.hi_closed and b.lo_closed):
                raise ValueError(f"intervals {a} and {b} overlap")
        self.intervals: tuple[Interval, ...] = tuple(ivs)

    @classmethod
    def parse(cls, text: str) -> "ObservableSet":
        parts = re.split(r"\s*[uU∪]\s*(?=[\[(])", text.strip())
        ivs = []
        for part in parts:
            m = _INTERVAL_RE.match(part)
            if not m:
                raise ValueError(f"cannot parse interval {part!r}")
            lb, lo, hi, rb = m.groups()
            ivs.append(Interval(float(lo), float(hi), lb == "[", rb == "]"))
        return cls(ivs)

    @classmethod
    def outside(cls, x: float) -> "ObservableSet":
        """``[-x, x]^c = [-inf, -x) u (x, inf]``."""
        return cls([Interval(-math.inf, -x, True, False), Interval(x, math.inf, False, True)])

    @classmethod
    def above(cls, y: float) -> "ObservableSet":
        """``(y, inf]`` for ``y > 0``."""
        return cls([Interval(y, math.inf, False, True)])

    @property
    def gap(self) -> float:
        return min(iv.gap for iv in self.intervals)

    def one_sided_threshold(self) -> float | None:
        """``y`` if the set is exactly ``(y, inf]``, else ``None``."""
        if len(self.intervals) == 1:
            iv = self.intervals[0]
            if iv.lo > 0 and not iv.lo_closed and iv.hi == math.inf and iv.hi_closed:
                return iv.lo
        return None

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        out = self.intervals[0].contains(v)
        for iv in self.intervals[1:]:
            out |= iv.contains(v)
        return out

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ObservableSet) and self.intervals == other.intervals

    def __hash__(self) -> int:
        return hash(self.intervals)

    def __str__(self) -> str:
        return "u".join(str(iv) for iv in self.intervals)

    __repr__ = __str__


@dataclass(frozen=True)
class ClusterEvent:
    """``M = {mu : mu(B_i) >= k_i for all i}``."""

    constraints: tuple[tuple[ObservableSet, int], ...]

    def __post_init__(self) -> None:
        cons = tuple((b, int(k)) for b, k in self.constraints)
        if not cons:
            raise ValueError("a cluster event needs at least one constraint")
        if any(k < 1 for _, k in cons):
            raise ValueError("every k_i must be >= 1")
        object.__setattr__(self, "constraints", cons)

    @classmethod
    def parse(cls, text: str) -> "ClusterEvent":
        cons = []
        for clause in text.split(";"):
            clause = clause.strip()
            if not clause:
                continue
            if ">=" not in clause:
                raise ValueError(f"cluster clause {clause!r} lacks '>=k'")
            set_text, k_text = clause.rsplit(">=", 1)
            cons.append((ObservableSet.parse(set_text), int(k_text)))
        return cls(tuple(cons))

    @classmethod
    def tail(cls, x: float) -> "ClusterEvent":
        """The event ``{mu([-x, x]^c) >= 1}``, i.e. ``M_x``."""
        return cls(((ObservableSet.outside(x), 1),))

    @property
    def d(self) -> int:
        return len(self.constraints)

    @property
    def sets(self) -> tuple[ObservableSet, ...]:
        return tuple(b for b, _ in self.constraints)

    @property
    def ks(self) -> tuple[int, ...]:
        return tuple(k for _, k in self.constraints)

    def __str__(self) -> str:
        return "; ".join(f"{b}>={k}" for b, k in self.constraints)


class TestFunction:
    """Continuous piecewise-linear ``f >= 0`` with compact support in ``E``."""

    __slots__ = ("xs", "ys")
    __test__ = False  # keep pytest from collecting this class

    def __init__(self, breakpoints: Sequence[tuple[float, float]]):
        pts = sorted((float(a), float(b)) for a, b in breakpoints)
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if xs.size < 2 or not np.all(np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoints need at least two distinct finite abscissae")
        if np.any(ys < 0):
            raise ValueError("test functions must be nonnegative")
        if ys[0] != 0 or ys[-1] != 0:
            raise ValueError("test functions must vanish at both ends of their support")
        if not (xs[0] > 0 or xs[-1] < 0):
            raise ValueError("support must be bounded away from 0")
        xs.setflags(write=False)
        ys.setflags(write=False)
        self.xs, self.ys = xs, ys

    @classmethod
    def tent(cls, lo: float, hi: float, peak: float = 1.0, at: float | None = None) -> "TestFunction":
        at = (lo + hi) / 2 if at is None else at
        return cls([(lo, 0.0), (at, peak), (hi, 0.0)])

    @classmethod
    def parse(cls, text: str) -> "TestFunction":
        """``"tent:lo,hi[,peak[,at]]"`` or ``"zero"``."""
        text = text.strip().lower()
        if text == "zero":
            return cls.zero()
        if not text.startswith("tent:"):
            raise ValueError(f"cannot parse test function {text!r}; expected 'tent:lo,hi[,peak[,at]]'")
        try:
            vals = [float(v) for v in text[5:].split(",")]
        except ValueError as exc:
            raise ValueError(f"bad number in test function {text!r}") from exc
        if not 2 <= len(vals) <= 4:
            raise ValueError(f"tent needs 2 to 4 numbers, got {len(vals)}")
        return cls.tent(*vals)

    @classmethod
    def zero(cls, lo: float = 1.0, hi: float = 2.0) -> "TestFunction":
        return cls([(lo, 0.0), (hi, 0.0)])

    @property
    def support(self) -> ObservableSet:
        return ObservableSet([Interval(self.xs[0], self.xs[-1], True, True)])

    @property
    def is_zero(self) -> bool:
        return not np.any(self.ys)

    def __call__(self, values) -> np.ndarray:
        return np.interp(np.asarray(values, dtype=float), self.xs, self.ys, left=0.0, right=0.0)

    def __str__(self) -> str:
        return "tent[" + ",".join(f"({x:g},{y:g})" for x, y in zip(self.xs, self.ys)) + "]"

    __repr__ = __str__


def tent_family() -> list[TestFunction]:
    """Twelve unit-peak tents, supports ``[c/2, 2c]`` for six centres spanning
    ``0.1 .. 10`` on each side of 0."""
    centres = np.logspace(-1.0, 1.0, 6)
    fam = [TestFunction.tent(c / 2, 2 * c, 1.0, c) for c in centres]
    fam += [TestFunction.tent(-2 * c, -c / 2, 1.0, -c) for c in centres]
    return fam


class PointPattern:
    """Finite counting measure; points may repeat, none equals 0."""

    __slots__ = ("points",)

    def __init__(self, points=()):
        p = np.array(points, dtype=float).ravel()
        if np.any(p == 0) or np.any(np.isnan(p)):
            raise ValueError("points must be nonzero numbers")
        p.setflags(write=False)
        self.points = p

    def __len__(self) -> int:
        return self.points.size

    def restrict(self, gap: float) -> "PointPattern":
        """Points with modulus at least ``gap``."""
        return PointPattern(self.points[np.abs(self.points) >= gap])

    def __repr__(self) -> str:
        return f"PointPattern({self.points.tolist()})"


def count(pattern: PointPattern, obs: ObservableSet) -> int:
    return int(np.count_nonzero(obs.contains(pattern.points)))


def max_modulus(pattern: PointPattern) -> float:
    return float(np.max(np.abs(pattern.points))) if len(pattern) else 0.0


def in_cluster_event(pattern: PointPattern, event: ClusterEvent) -> bool:
    return all(count(pattern, b) >= k for b, k in event.constraints)


def integrate(pattern: PointPattern, f: TestFunction) -> float:
    return float(np.sum(f(pattern.points)))


def laplace_empirical(patterns: Sequence[PointPattern], f: TestFunction, seed: int = 0) -> Estimate:
    """Mean and standard error of ``exp(-N(f))`` over a collection of patterns."""
    patterns = list(patterns)
    if len(patterns) < 2:
        raise ValueError("need at least two patterns")
    vals = np.exp(-np.array([integrate(p, f) for p in patterns]))
    return mean_estimate(vals, seed, functional=str(f))
