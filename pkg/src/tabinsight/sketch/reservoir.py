"""Seeded reservoir sampling and the quantile estimates built on it.

Used for visualization support (box plots, large-column previews), not for
ranking. The sample is exact whenever the column fits in the reservoir.
"""

from __future__ import annotations

import math

import numpy as np

from ..dataset import NUMERIC, Column
from ..errors import SketchError

DEFAULT_RESERVOIR = 4096

_TINY = 2.3e-308


def reservoir_sample(values: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Uniform sample of `size` values without replacement (Algorithm L).

    Skips ahead geometrically instead of testing every row, so the cost is
    O(size * (1 + log(n/size))) draws. Deterministic for a fixed seed.
    """
    if size < 1:
        raise SketchError("reservoir size must be at least 1")
    values = np.asarray(values)
    n = len(values)
    if n <= size:
        return values.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    reservoir = values[:size].copy()
    w = math.exp(math.log(max(rng.random(), _TINY)) / size)
    i = size - 1
    while True:
        i += int(math.log(max(rng.random(), _TINY)) / math.log1p(-w)) + 1
        if i >= n:
            return reservoir
        reservoir[rng.integers(0, size)] = values[i]
        w *= math.exp(math.log(max(rng.random(), _TINY)) / size)


def quantile_estimates(
    c: Column,
    probs: list[float],
    reservoir_size: int = DEFAULT_RESERVOIR,
    seed: int = 0,
) -> list[float]:
    """Quantiles of a reservoir sample of the column's valid rows.

    probs must be sorted ascending within [0, 1]; the output is monotone
    non-decreasing and exact when the column fits in the reservoir.
    """
    if c.kind != NUMERIC:
        raise SketchError(f"column {c.name!r} is not numeric")
    for lo, hi in zip(probs, probs[1:]):
        if lo > hi:
            raise SketchError("probs must be sorted ascending")
    if any(p < 0 or p > 1 for p in probs):
        raise SketchError("probs must lie in [0, 1]")
    x = c.valid_values()
    if x.size == 0:
        raise SketchError(f"column {c.name!r} has no valid rows")
    sample = reservoir_sample(x, reservoir_size, seed)
    return [float(q) for q in np.quantile(sample, probs)]
