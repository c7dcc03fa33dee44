"""Mergeable random-hyperplane sketches for correlation estimation.

Per column the sketch keeps k partial dot products against shared
pseudo-random normal vectors, plus the running sums needed to center lazily.
Finalizing produces a k-bit sign vector; the Hamming distance between two
columns' sign vectors estimates the angle between the centered columns, and
cos(pi * H / k) estimates their correlation.

Exactness design: data values are snapped to a per-column power-of-two grid
and normal components to a fixed 12-fraction-bit grid, so every accumulator
holds an exactly representable integer (all partial sums stay far below
2**53). Addition of exact integers in float64 is associative, which gives
bit-for-bit agreement between merged partitioned builds and single-pass
builds, for any partition. The grid is derived from whole-column statistics,
never from a partition's rows.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataset import NUMERIC, Column
from ..errors import SketchError
from .rng import MAX_WIDTH, quantized_normal_components

MAX_SKETCH_ROWS = 1_000_000_000

_MASK64 = 0xFFFFFFFFFFFFFFFF

_MAGIC = b"THSK"
_FORMAT_VERSION = 1


def default_width(n_rows: int) -> int:
    """Sketch width for a dataset of n rows: max(64, ceil(log2(n)^2)),
    rounded up to a whole number of 64-bit words."""
    if n_rows < 2:
        return 64
    raw = math.ceil(math.log2(n_rows) ** 2)
    return max(64, ((raw + 63) // 64) * 64)


@dataclass(frozen=True)
class HyperplaneConfig:
    k: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.k <= MAX_WIDTH:
            raise SketchError(f"sketch width must be in [1, {MAX_WIDTH}], got {self.k}")
        object.__setattr__(self, "seed", self.seed & _MASK64)


def _ceil_log2(x: float) -> int:
    return math.ceil(math.log2(x))


def _grid_depth(n_rows: int) -> int:
    # Budget: n * (2**depth + 1) * 33966 must stay below 2**53 so that every
    # partial sum in the dot-product accumulation is an exact integer.
    return max(8, min(24, 37 - _ceil_log2(max(n_rows, 2))))


def column_grid(column: Column) -> tuple[float, float]:
    """(offset, step) of the power-of-two value grid for one column.

    Derived from whole-column min/max and total row count, so partitioned
    builds of the same column always agree on it.
    """
    if column.kind != NUMERIC:
        raise SketchError(f"column {column.name!r} is not numeric")
    if column.n_rows > MAX_SKETCH_ROWS:
        raise SketchError(f"column exceeds the {MAX_SKETCH_ROWS}-row sketch limit")
    x = column.valid_values()
    if x.size == 0:
        return 0.0, 1.0
    lo = float(x.min())
    hi = float(x.max())
    halfrange = (hi - lo) / 2.0
    mid = lo + halfrange
    if halfrange <= 0.0:
        return float(np.rint(mid)), 1.0
    step = 2.0 ** (_ceil_log2(halfrange) - _grid_depth(column.n_rows))
    offset = step * float(np.rint(mid / step))
    if not math.isfinite(offset):
        offset = mid
    return offset, step


@dataclass(frozen=True)
class HyperplaneSketch:
    """Pre-sign partial sums for one column; merge before finalizing.

    dots[i] = sum over covered valid rows of grid(b_j) * r_hat(i, j);
    rsums[i] = sum of r_hat(i, j) over the same rows. value_sum and row_count
    feed the deferred centering. All entries are exact integers stored in
    float64.
    """

    column_id: str
    k: int
    seed: int
    grid_offset: float
    grid_step: float
    dots: np.ndarray
    rsums: np.ndarray
    value_sum: float
    row_count: int

    def __post_init__(self) -> None:
        if len(self.dots) != self.k or len(self.rsums) != self.k:
            raise SketchError("accumulator length disagrees with sketch width")
        self.dots.flags.writeable = False
        self.rsums.flags.writeable = False

    def compatible_with(self, other: "HyperplaneSketch") -> bool:
        return (
            self.column_id == other.column_id
            and self.k == other.k
            and self.seed == other.seed
            and self.grid_offset == other.grid_offset
            and self.grid_step == other.grid_step
        )


@dataclass(frozen=True)
class SignVector:
    """Finalized k-bit sign pattern, packed little-endian into 64-bit words."""

    column_id: str
    k: int
    words: np.ndarray

    def __post_init__(self) -> None:
        self.words.flags.writeable = False


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    raw = np.packbits(bits, bitorder="little").tobytes()
    pad = (-len(raw)) % 8
    return np.frombuffer(raw + b"\x00" * pad, dtype="<u8").copy()


def _resolve_rows(n_rows: int, rows: tuple[int, int] | None) -> tuple[int, int]:
    if rows is None:
        return 0, n_rows
    lo, hi = rows
    if not (0 <= lo <= hi <= n_rows):
        raise SketchError(f"row range [{lo}, {hi}) is outside [0, {n_rows})")
    return lo, hi


def build_hyperplane_many(
    columns: Sequence[Column],
    cfg: HyperplaneConfig,
    rows: tuple[int, int] | None = None,
    grids: Sequence[tuple[float, float]] | None = None,
) -> list[HyperplaneSketch]:
    """Sketch several columns in one pass, sharing the random normals.

    rows is a half-open absolute row range (whole column when omitted).
    Sharing one normal block across columns is what makes the per-seed cost
    O(n*k) instead of O(|B|*n*k).
    """
    if not columns:
        return []
    n_rows = columns[0].n_rows
    for c in columns:
        if c.kind != NUMERIC:
            raise SketchError(f"column {c.name!r} is not numeric")
        if c.n_rows != n_rows:
            raise SketchError("columns disagree on row count")
    if n_rows > MAX_SKETCH_ROWS:
        raise SketchError(f"dataset exceeds the {MAX_SKETCH_ROWS}-row sketch limit")
    if grids is None:
        grids = [column_grid(c) for c in columns]
    lo, hi = _resolve_rows(n_rows, rows)

    k = cfg.k
    n_cols = len(columns)
    dots = np.zeros((n_cols, k))
    rsums = np.zeros((n_cols, k))
    value_sums = np.zeros(n_cols)
    counts = np.zeros(n_cols, dtype=np.int64)

    block = max(256, min(8192, (1 << 22) // k))
    for b_lo in range(lo, hi, block):
        b_hi = min(b_lo + block, hi)
        r_hat = quantized_normal_components(
            cfg.seed, np.arange(b_lo, b_hi, dtype=np.uint64), k
        )
        q = np.empty((b_hi - b_lo, n_cols))
        m = np.empty((b_hi - b_lo, n_cols))
        for ci, (col, (offset, step)) in enumerate(zip(columns, grids)):
            valid = col.valid[b_lo:b_hi]
            snapped = np.rint((col.values[b_lo:b_hi] - offset) / step)
            q[:, ci] = np.where(valid, snapped, 0.0)
            m[:, ci] = valid
        dots += q.T @ r_hat
        rsums += m.T @ r_hat
        value_sums += q.sum(axis=0)
        counts += m.sum(axis=0).astype(np.int64)

    return [
        HyperplaneSketch(
            column_id=col.name,
            k=k,
            seed=cfg.seed,
            grid_offset=grids[ci][0],
            grid_step=grids[ci][1],
            dots=dots[ci].copy(),
            rsums=rsums[ci].copy(),
            value_sum=float(value_sums[ci]),
            row_count=int(counts[ci]),
        )
        for ci, col in enumerate(columns)
    ]


def build_hyperplane(
    column: Column,
    cfg: HyperplaneConfig,
    rows: tuple[int, int] | None = None,
    grid: tuple[float, float] | None = None,
) -> HyperplaneSketch:
    """Sketch one column over a row range (whole column by default)."""
    grids = [grid] if grid is not None else None
    return build_hyperplane_many([column], cfg, rows=rows, grids=grids)[0]


def merge_hyperplane(a: HyperplaneSketch, b: HyperplaneSketch) -> HyperplaneSketch:
    """Combine sketches over disjoint row ranges of the same column."""
    if not a.compatible_with(b):
        raise SketchError(
            f"cannot merge sketches for {a.column_id!r}/{b.column_id!r}: "
            "column, width, seed, and value grid must all match"
        )
    return HyperplaneSketch(
        column_id=a.column_id,
        k=a.k,
        seed=a.seed,
        grid_offset=a.grid_offset,
        grid_step=a.grid_step,
        dots=a.dots + b.dots,
        rsums=a.rsums + b.rsums,
        value_sum=a.value_sum + b.value_sum,
        row_count=a.row_count + b.row_count,
    )


def finalize(s: HyperplaneSketch) -> SignVector:
    """Sign vector of the centered column: bit i = (b~ . r_i >= 0).

    Centering is algebraic: b~ . r_i = dots[i] - mean * rsums[i], compared as
    dots[i] * row_count - value_sum * rsums[i] in exact integer arithmetic so
    ties and near-ties are decided identically on every machine.
    """
    if s.row_count == 0:
        raise SketchError(f"cannot finalize an empty sketch for {s.column_id!r}")
    n = int(s.row_count)
    vs = int(s.value_sum)
    bits = np.empty(s.k, dtype=np.uint8)
    dots = s.dots
    rsums = s.rsums
    for i in range(s.k):
        bits[i] = int(dots[i]) * n - vs * int(rsums[i]) >= 0
    return SignVector(column_id=s.column_id, k=s.k, words=_pack_bits(bits))


def hamming(a: SignVector, b: SignVector) -> int:
    if a.k != b.k:
        raise SketchError(f"sign vector widths differ: {a.k} vs {b.k}")
    return int(np.bitwise_count(a.words ^ b.words).sum())


def estimate_correlation(a: SignVector, b: SignVector) -> float:
    """cos(pi * H / k), the hyperplane estimate of the Pearson correlation."""
    return float(math.cos(math.pi * hamming(a, b) / a.k))


def estimate_all_pairs(vectors: Sequence[SignVector]) -> np.ndarray:
    """Symmetric matrix of pairwise correlation estimates, unit diagonal.

    The whole scan is XOR plus popcount over packed words, O(pairs * k / 64).
    """
    n = len(vectors)
    if n == 0:
        return np.zeros((0, 0))
    k = vectors[0].k
    for v in vectors:
        if v.k != k:
            raise SketchError("sign vectors disagree on width")
    words = np.stack([v.words for v in vectors])
    h = np.zeros((n, n), dtype=np.int64)
    chunk = max(1, (1 << 24) // (max(n, 1) * words.shape[1] * 8))
    for i in range(0, n, chunk):
        xor = words[i : i + chunk, None, :] ^ words[None, :, :]
        h[i : i + chunk] = np.bitwise_count(xor).sum(axis=2, dtype=np.int64)
    est = np.cos(np.pi * h / k)
    np.fill_diagonal(est, 1.0)
    return est


def sketch_to_bytes(s: HyperplaneSketch) -> bytes:
    """Binary codec: fixed header, then little-endian accumulator arrays."""
    ident = s.column_id.encode("utf-8")
    head = struct.pack(
        "<4sIQII", _MAGIC, _FORMAT_VERSION, s.seed & _MASK64, s.k, len(ident)
    )
    grid = struct.pack("<dd", s.grid_offset, s.grid_step)
    tail = struct.pack("<dQ", s.value_sum, s.row_count)
    return (
        head
        + ident
        + grid
        + s.dots.astype("<f8").tobytes()
        + s.rsums.astype("<f8").tobytes()
        + tail
    )


def sketch_from_bytes(raw: bytes) -> HyperplaneSketch:
    try:
        magic, version, seed, k, id_len = struct.unpack_from("<4sIQII", raw, 0)
        if magic != _MAGIC:
            raise SketchError("not a sketch file (bad magic)")
        if version != _FORMAT_VERSION:
            raise SketchError(f"unsupported sketch format version {version}")
        pos = struct.calcsize("<4sIQII")
        ident = raw[pos : pos + id_len].decode("utf-8")
        pos += id_len
        offset, step = struct.unpack_from("<dd", raw, pos)
        pos += 16
        dots = np.frombuffer(raw, dtype="<f8", count=k, offset=pos).astype(np.float64)
        pos += 8 * k
        rsums = np.frombuffer(raw, dtype="<f8", count=k, offset=pos).astype(np.float64)
        pos += 8 * k
        value_sum, row_count = struct.unpack_from("<dQ", raw, pos)
        if len(raw) != pos + struct.calcsize("<dQ"):
            raise SketchError("sketch file has trailing or missing bytes")
    except (struct.error, UnicodeDecodeError, ValueError) as exc:
        raise SketchError(f"malformed sketch data: {exc}") from exc
    return HyperplaneSketch(
        column_id=ident,
        k=k,
        seed=seed,
        grid_offset=offset,
        grid_step=step,
        dots=dots,
        rsums=rsums,
        value_sum=value_sum,
        row_count=int(row_count),
    )
