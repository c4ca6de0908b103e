"""Batched replicate evaluation.

Paths are generated in batches, reduced to small per-path statistics by a
user function, and reassembled in path order. Every path owns its random
stream, so the result does not depend on the batch size or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .models import ModelSpec, generate_paths

__all__ = ["map_paths", "BATCH_ELEMENTS"]

BATCH_ELEMENTS = 2_000_000


def map_paths(
    model: ModelSpec,
    n: int,
    reps: int,
    seed: int,
    fn: Callable[[np.ndarray], np.ndarray],
    *,
    stream: int = 0,
    threads: int = 1,
    batch_size: int | None = None,
) -> np.ndarray:
    """Apply ``fn`` to stacks of paths; returns the per-path outputs stacked along axis 0."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if batch_size is None:
        batch_size = max(1, min(reps, BATCH_ELEMENTS // max(n, 1)))
    bounds = [(lo, min(lo + batch_size, reps)) for lo in range(0, reps, batch_size)]

    def work(b: tuple[int, int]) -> np.ndarray:
        x = generate_paths(model, n, seed, range(*b), stream=stream)
        return np.asarray(fn(x))

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    return np.concatenate(parts, axis=0)
