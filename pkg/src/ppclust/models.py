"""Stationary sequence generators with known marginal tails.

Three families are supported:

* ``IID``: i.i.d. draws from the base law.
* ``MOVING_MAX``: ``X_i = max(Y_i, ..., Y_{i+m-1})`` over i.i.d. base ``Y``.
* ``ARMAX``: ``X_i = max(a X_{i-1}, c Z_i)`` with Fréchet innovations, started
  from the stationary marginal so short paths carry no burn-in bias.

Every path is a pure function of ``(model, n, seed, path, stream)``; the random
stream of path ``i`` is derived from ``SeedSequence(seed, spawn_key=(stream, i))``
so batches can be generated in any order and still agree bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Family",
    "Tail",
    "ModelSpec",
    "ParameterError",
    "path_rng",
    "generate_sequence",
    "generate_paths",
    "marginal_tail",
    "base_cdf",
    "base_quantile",
    "scale_row",
]

_ARMAX_CHUNK = 512


class ParameterError(ValueError):
    """Invalid model parameters."""


class Family(str, enum.Enum):
    IID = "iid"
    MOVING_MAX = "moving_max"
    ARMAX = "armax"


class Tail(str, enum.Enum):
    FRECHET = "frechet"
    PARETO = "pareto"


@dataclass(frozen=True)
class ModelSpec:
    """A stationary model with an exact marginal tail.

    Parameters
    ----------
    family : Family
    base_tail : Tail
        Law of the base variables (``Y`` for moving maxima, ``Z`` for ARMAX).
    alpha : float
        Tail index of the base law, ``P(Y > t) ~ t^{-alpha}``.
    window_m : int
        Moving-maximum window. Ignored unless ``family`` is ``MOVING_MAX``.
    armax_alpha : float
        ARMAX autoregressive coefficient in ``(0, 1)``.
    """

    family: Family = Family.IID
    base_tail: Tail = Tail.FRECHET
    alpha: float = 1.0
    window_m: int = 1
    armax_alpha: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "base_tail", Tail(self.base_tail))
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")
        if self.family is Family.MOVING_MAX:
            if int(self.window_m) != self.window_m or self.window_m < 1:
                raise ParameterError(f"window_m must be a positive integer, got {self.window_m}")
            object.__setattr__(self, "window_m", int(self.window_m))
        else:
            object.__setattr__(self, "window_m", 1)
        if self.family is Family.ARMAX:
            if not 0.0 < self.armax_alpha < 1.0:
                raise ParameterError(f"armax_alpha must lie in (0, 1), got {self.armax_alpha}")
            if self.base_tail is not Tail.FRECHET:
                raise ParameterError("ARMAX is only defined here with Fréchet innovations")

    @property
    def window(self) -> int:
        """Number of base variables feeding one observation (1 unless moving maxima)."""
        return self.window_m if self.family is Family.MOVING_MAX else 1

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Build a model from ``"family=moving_max, m=3, base=frechet, alpha=1.0"``.

        A bare family name (``"iid"``) is accepted as shorthand.
        """
        text = text.strip()
        if not text:
            raise ParameterError("empty model description")
        if "=" not in text:
            return cls(family=Family(text.lower()))
        fields: dict[str, str] = {}
        for part in text.replace(";", ",").split(","):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ParameterError(f"malformed model field {part!r}")
            key, value = (s.strip() for s in part.split("=", 1))
            fields[key.lower()] = value
        kwargs: dict = {}
        try:
            if "family" in fields:
                kwargs["family"] = Family(fields.pop("family").lower())
            if "base" in fields:
                kwargs["base_tail"] = Tail(fields.pop("base").lower())
            if "alpha" in fields:
                kwargs["alpha"] = float(fields.pop("alpha"))
            for key in ("m", "window", "window_m"):
                if key in fields:
                    kwargs["window_m"] = int(fields.pop(key))
            for key in ("a", "armax_alpha", "phi"):
                if key in fields:
                    kwargs["armax_alpha"] = float(fields.pop(key))
        except ValueError as exc:
            raise ParameterError(str(exc)) from exc
        if fields:
            raise ParameterError(f"unknown model fields: {sorted(fields)}")
        return cls(**kwargs)

    def describe(self) -> str:
        parts = [f"family={self.family.value}"]
        if self.family is Family.MOVING_MAX:
            parts.append(f"m={self.window_m}")
        if self.family is Family.ARMAX:
            parts.append(f"a={self.armax_alpha!r}")
        parts.append(f"base={self.base_tail.value}")
        parts.append(f"alpha={self.alpha!r}")
        return ",".join(parts)


def path_rng(seed: int, path: int = 0, stream: int = 0) -> np.random.Generator:
    """Independent generator for one replicate path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(path)))
    return np.random.Generator(np.random.PCG64(ss))


# ----------------------------------------------------------------------------
# base laws


def base_cdf(model: ModelSpec, t):
    """CDF of the base variable ``Y`` (or the ARMAX stationary marginal)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        if model.base_tail is Tail.FRECHET:
            return np.where(t > 0, np.exp(-np.power(np.where(t > 0, t, 1.0), -model.alpha)), 0.0)
        return np.where(t >= 1, 1.0 - np.power(np.maximum(t, 1.0), -model.alpha), 0.0)


def _log_base_cdf(model: ModelSpec, t: float) -> float:
    if model.base_tail is Tail.FRECHET:
        return -(t ** -model.alpha)
    if t <= 1:
        return -math.inf
    return math.log1p(-(t ** -model.alpha))


def base_quantile(model: ModelSpec, p: float) -> float:
    """Inverse of :func:`base_cdf` on ``(0, 1)``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    if model.base_tail is Tail.FRECHET:
        return (-math.log(p)) ** (-1.0 / model.alpha)
    return (1.0 - p) ** (-1.0 / model.alpha)


def _draw_base(rng: np.random.Generator, model: ModelSpec, size: int) -> np.ndarray:
    out = _base_values(rng, model, size)
    bad = ~np.isfinite(out) | (out == 0)
    while bad.any():
        out[bad] = _base_values(rng, model, int(bad.sum()))
        bad = ~np.isfinite(out) | (out == 0)
    return out


def _base_values(rng: np.random.Generator, model: ModelSpec, size: int) -> np.ndarray:
    if model.base_tail is Tail.FRECHET:
        e = rng.standard_exponential(size)
        if model.alpha == 1.0:
            return 1.0 / e
        return np.power(e, -1.0 / model.alpha)
    u = 1.0 - rng.random(size)
    return np.power(u, -1.0 / model.alpha)


# ----------------------------------------------------------------------------
# generation


def _draw_path_inputs(rng: np.random.Generator, model: ModelSpec, n: int) -> np.ndarray:
    if model.family is Family.ARMAX:
        # first entry is the stationary start X_0, the rest are innovations Z_1..Z_n
        return _draw_base(rng, model, n + 1)
    return _draw_base(rng, model, n + model.window - 1)


def _moving_max(y: np.ndarray, m: int, n: int) -> np.ndarray:
    x = y[..., :n].copy()
    for shift in range(1, m):
        np.maximum(x, y[..., shift:shift + n], out=x)
    return x


def _armax(inputs: np.ndarray, model: ModelSpec) -> np.ndarray:
    """Vectorised ``X_i = max(a X_{i-1}, c Z_i)`` along the last axis.

    Within a chunk of length T starting after ``prev``:
    ``log X_{s+t} = t log a + max(log prev + log a, max_{q<=t} (log cZ_{s+q} - q log a))``.
    """
    a = model.armax_alpha
    c = (1.0 - a ** model.alpha) ** (1.0 / model.alpha)
    log_a = math.log(a)
    inputs = np.atleast_2d(inputs)
    prev = np.log(inputs[:, 0])
    logz = np.log(c) + np.log(inputs[:, 1:])
    n = logz.shape[1]
    out = np.empty_like(logz)
    steps = np.arange(_ARMAX_CHUNK, dtype=float) * log_a
    for start in range(0, n, _ARMAX_CHUNK):
        stop = min(start + _ARMAX_CHUNK, n)
        t = steps[: stop - start]
        v = logz[:, start:stop] - t
        np.maximum.accumulate(v, axis=1, out=v)
        np.maximum(v, (prev + log_a)[:, None], out=v)
        v += t
        out[:, start:stop] = v
        prev = v[:, -1]
    return np.exp(out)


def _finish(inputs: np.ndarray, model: ModelSpec, n: int) -> np.ndarray:
    if model.family is Family.ARMAX:
        return _armax(inputs, model)
    if model.family is Family.MOVING_MAX and model.window_m > 1:
        return _moving_max(inputs, model.window_m, n)
    return np.ascontiguousarray(inputs[..., :n])


def _check_n(n: int) -> int:
    if int(n) != n or n < 1:
        raise ParameterError(f"path length must be a positive integer, got {n}")
    return int(n)


def generate_sequence(model: ModelSpec, n: int, seed: int, *, path: int = 0, stream: int = 0) -> np.ndarray:
    """One stationary path ``X_1, ..., X_n``.

    Identical ``(model, n, seed, path, stream)`` always produce identical output.
    """
    n = _check_n(n)
    inputs = _draw_path_inputs(path_rng(seed, path, stream), model, n)
    return _finish(inputs[None, :], model, n)[0]


def generate_paths(
    model: ModelSpec, n: int, seed: int, paths: range | np.ndarray, *, stream: int = 0
) -> np.ndarray:
    """Stack of paths, row ``i`` equal to ``generate_sequence(..., path=paths[i])``."""
    n = _check_n(n)
    paths = list(paths)
    width = n + 1 if model.family is Family.ARMAX else n + model.window - 1
    inputs = np.empty((len(paths), width))
    for row, p in enumerate(paths):
        inputs[row] = _draw_path_inputs(path_rng(seed, p, stream), model, n)
    return _finish(inputs, model, n)


# ----------------------------------------------------------------------------
# exact marginal


def marginal_tail(model: ModelSpec, t: float) -> float:
    """Exact ``P(X_1 > t)``."""
    t = float(t)
    if not t > 0:
        raise ValueError(f"tail argument must be positive, got {t}")
    if math.isinf(t):
        return 0.0
    log_f = _log_base_cdf(model, t)
    if model.family is Family.MOVING_MAX:
        log_f *= model.window_m
    return -math.expm1(log_f)


def scale_row(row: np.ndarray, a_n: float) -> np.ndarray:
    """Array points ``X_{i,n} = X_i / a_n``."""
    if not a_n > 0:
        raise ValueError(f"scaling constant must be positive, got {a_n}")
    row = np.asarray(row, dtype=float)
    if np.any(row == 0):
        raise ValueError("rows must not contain zeros")
    return row / a_n
