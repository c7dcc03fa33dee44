"""Counter-based deterministic pseudo-randomness for sketch construction.

Random-vector components are never stored: component (i, j) is recomputed on
demand by hashing a counter built from the row index j and vector index i.
Partitioned builds therefore see exactly the same random values regardless of
how rows are split, which is what makes sketch merges reproduce the
single-pass result.

The hash is the SplitMix64 finalizer over a Weyl sequence, applied to
64-bit counters; normals come from the inverse normal CDF on a symmetric
53-bit uniform grid.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Vector index lives in the low bits of the counter; this caps sketch width.
VECTOR_INDEX_BITS = 20
MAX_WIDTH = 1 << VECTOR_INDEX_BITS

# Normal components are rounded to this many fractional bits so that sketch
# accumulators hold exactly representable integers (see hyperplane module).
NORMAL_FRACTION_BITS = 12
NORMAL_SCALE = float(1 << NORMAL_FRACTION_BITS)


def mix64(x: np.ndarray | int) -> np.ndarray:
    """SplitMix64 finalizer, vectorized over uint64."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x ^ (x >> np.uint64(30))
        x = x * _MIX1
        x = x ^ (x >> np.uint64(27))
        x = x * _MIX2
        x = x ^ (x >> np.uint64(31))
    return x


def _hash_counters(seed: int, counters: np.ndarray) -> np.ndarray:
    base = mix64(np.uint64(seed & _MASK64))
    with np.errstate(over="ignore"):
        return mix64(base + counters * GOLDEN)


def _grid_normals(h: np.ndarray) -> np.ndarray:
    """Map 64-bit hashes to standard normals via a symmetric 53-bit grid.

    The top half of the grid is mirrored through integer space so ndtri only
    sees probabilities at or below one half; this keeps the extreme grid
    points finite (|z| tops out near 8.3) and the distribution exactly
    antisymmetric.
    """
    m = h >> np.uint64(11)
    half = np.uint64(1) << np.uint64(52)
    upper = m >= half
    full = np.uint64((1 << 53) - 1)
    j = np.where(upper, full - m, m)
    p = (j.astype(np.float64) + 0.5) * 2.0**-53
    z = ndtri(p)
    return np.where(upper, -z, z)


def normal_components(seed: int, rows: np.ndarray, k: int) -> np.ndarray:
    """Standard-normal matrix r[j, i] for the given rows and vectors 0..k-1."""
    if k < 1 or k > MAX_WIDTH:
        raise ValueError(f"sketch width must be in [1, {MAX_WIDTH}]")
    rows = np.asarray(rows, dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = (rows[:, None] << np.uint64(VECTOR_INDEX_BITS)) | np.arange(
            k, dtype=np.uint64
        )[None, :]
    return _grid_normals(_hash_counters(seed, counters))


def quantized_normal_components(seed: int, rows: np.ndarray, k: int) -> np.ndarray:
    """normal_components rounded to the fixed 12-fraction-bit integer grid.

    Returned as float64 holding exact integers in [-33966, 33966], ready for
    exact accumulation.
    """
    return np.rint(normal_components(seed, rows, k) * NORMAL_SCALE)
