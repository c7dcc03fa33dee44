"""Immutable typed columnar datasets and single-pass moment summaries.

A dataset is ingested once from delimited text and never mutated afterwards,
so it can be shared freely across threads. Each numeric column carries a
validity mask instead of sentinel values; statistics run over valid rows only.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDatasetError, IngestError

NUMERIC = "numeric"
CATEGORICAL = "categorical"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Column:
    """One typed column: float64 values or int32 dictionary codes, plus validity."""

    name: str
    kind: str
    values: np.ndarray
    valid: np.ndarray
    dictionary: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValueError(f"unknown column kind {self.kind!r}")
        if len(self.values) != len(self.valid):
            raise ValueError("values and validity mask disagree on length")
        _freeze(self.values)
        _freeze(self.valid)

    @property
    def n_rows(self) -> int:
        return len(self.values)

    @property
    def n_valid(self) -> int:
        return int(self.valid.sum())

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def valid_values(self) -> np.ndarray:
        """Values at valid rows (float64 for numeric, int32 codes for categorical)."""
        return self.values[self.valid]

    def tokens(self) -> list[str | None]:
        """Categorical rows decoded back to tokens; None where null."""
        if self.kind != CATEGORICAL:
            raise ValueError("tokens() is only defined for categorical columns")
        return [self.dictionary[c] if ok else None for c, ok in zip(self.values, self.valid)]


@dataclass(frozen=True)
class Dataset:
    """Immutable table: ordered columns of equal length with unique names."""

    name: str
    columns: tuple[Column, ...]
    n_rows: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValueError("duplicate column names")
        for c in self.columns:
            if c.n_rows != self.n_rows:
                raise ValueError(f"column {c.name!r} has {c.n_rows} rows, expected {self.n_rows}")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def column(self, name: str) -> Column:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def column_index(self, name: str) -> int:
        if name not in self._index:
            raise KeyError(f"no column named {name!r}")
        return self._index[name]

    def has_column(self, name: str) -> bool:
        return name in self._index

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def numeric_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind == NUMERIC]

    def categorical_columns(self) -> list[Column]:
        return [c for c in self.columns if c.kind == CATEGORICAL]


def head(ds: Dataset, n: int) -> Dataset:
    """The first n rows as a new dataset (scaling benchmarks slice with this)."""
    n = min(n, ds.n_rows)
    cols = tuple(
        Column(
            name=c.name,
            kind=c.kind,
            values=c.values[:n].copy(),
            valid=c.valid[:n].copy(),
            dictionary=c.dictionary,
        )
        for c in ds.columns
    )
    return Dataset(name=ds.name, columns=cols, n_rows=n)


@dataclass(frozen=True)
class MomentSummary:
    """Mergeable running power sums over the valid rows of a numeric column.

    Holds n, Sx, Sx^2, Sx^3, Sx^4 plus the running min/max. Merging is
    component-wise addition (min/max combine), so any row partition folds back
    to the whole-column summary.
    """

    count: int = 0
    sum1: float = 0.0
    sum2: float = 0.0
    sum3: float = 0.0
    sum4: float = 0.0
    minimum: float = math.inf
    maximum: float = -math.inf

    @classmethod
    def from_values(cls, values: np.ndarray) -> "MomentSummary":
        x = np.asarray(values, dtype=np.float64)
        if x.size == 0:
            return cls()
        x2 = x * x
        return cls(
            count=int(x.size),
            sum1=float(x.sum()),
            sum2=float(x2.sum()),
            sum3=float((x2 * x).sum()),
            sum4=float((x2 * x2).sum()),
            minimum=float(x.min()),
            maximum=float(x.max()),
        )

    def merge(self, other: "MomentSummary") -> "MomentSummary":
        return MomentSummary(
            count=self.count + other.count,
            sum1=self.sum1 + other.sum1,
            sum2=self.sum2 + other.sum2,
            sum3=self.sum3 + other.sum3,
            sum4=self.sum4 + other.sum4,
            minimum=min(self.minimum, other.minimum),
            maximum=max(self.maximum, other.maximum),
        )

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise ValueError("mean of empty summary")
        return self.sum1 / self.count

    @property
    def value_range(self) -> float:
        if self.count == 0:
            return 0.0
        return self.maximum - self.minimum


def moment_summary(column: Column) -> MomentSummary:
    """Single-pass summary of a numeric column over its valid rows."""
    if column.kind != NUMERIC:
        raise ValueError(f"column {column.name!r} is not numeric")
    return MomentSummary.from_values(column.values[column.valid])


def merge_summaries(a: MomentSummary, b: MomentSummary) -> MomentSummary:
    return a.merge(b)


def _parses_numeric(token: str) -> bool:
    # Underscores are a Python float() quirk, not CSV practice; non-finite
    # tokens would violate the finite-where-valid invariant.
    if "_" in token:
        return False
    try:
        return math.isfinite(float(token))
    except ValueError:
        return False


def _decode(source: bytes | str | io.IOBase) -> str:
    if isinstance(source, str):
        return source
    if isinstance(source, bytes):
        return source.decode("utf-8")
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def ingest_csv(
    source: bytes | str | io.IOBase,
    *,
    name: str = "dataset",
    delimiter: str = ",",
    header: bool = True,
    null_token: str = "",
) -> Dataset:
    """Parse delimited UTF-8 text into an immutable typed dataset.

    A column is numeric iff every non-null token parses as a finite real
    number; otherwise it is categorical with a first-seen-order dictionary.
    Blank lines are skipped; a row with the wrong field count raises
    IngestError naming the offending physical row.
    """
    text = _decode(source)
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    raw_rows: list[tuple[int, list[str]]] = []
    for lineno, row in enumerate(reader, start=1):
        if not row:
            continue
        raw_rows.append((lineno, row))

    if not raw_rows:
        raise EmptyDatasetError("input contains no rows")

    if header:
        _, names = raw_rows[0]
        data_rows = raw_rows[1:]
        if len(set(names)) != len(names):
            raise IngestError("duplicate column names in header")
    else:
        width = len(raw_rows[0][1])
        names = [f"col_{i}" for i in range(width)]
        data_rows = raw_rows

    n_cols = len(names)
    if n_cols == 0:
        raise IngestError("no columns")
    if not data_rows:
        raise EmptyDatasetError("input contains no data rows")

    for lineno, row in data_rows:
        if len(row) != n_cols:
            raise IngestError(f"row {lineno}: expected {n_cols} fields, got {len(row)}")

    n_rows = len(data_rows)
    columns = []
    for j, col_name in enumerate(names):
        tokens = [row[j] for _, row in data_rows]
        valid = np.array([t != null_token for t in tokens], dtype=bool)
        non_null = [t for t in tokens if t != null_token]
        if all(_parses_numeric(t) for t in non_null):
            values = np.zeros(n_rows, dtype=np.float64)
            for i, t in enumerate(tokens):
                if valid[i]:
                    values[i] = float(t)
            columns.append(Column(name=col_name, kind=NUMERIC, values=values, valid=valid))
        else:
            dictionary: list[str] = []
            seen: dict[str, int] = {}
            codes = np.full(n_rows, -1, dtype=np.int32)
            for i, t in enumerate(tokens):
                if not valid[i]:
                    continue
                if t not in seen:
                    seen[t] = len(dictionary)
                    dictionary.append(t)
                codes[i] = seen[t]
            columns.append(
                Column(
                    name=col_name,
                    kind=CATEGORICAL,
                    values=codes,
                    valid=valid,
                    dictionary=tuple(dictionary),
                )
            )
    return Dataset(name=name, columns=tuple(columns), n_rows=n_rows)


def _format_numeric(x: float) -> str:
    # repr round-trips float64 exactly
    return repr(float(x))


def to_csv(ds: Dataset, *, delimiter: str = ",", null_token: str = "") -> str:
    """Serialize back to delimited text; numeric values round-trip bit-exactly."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(ds.column_names)
    cells: list[list[str]] = []
    for col in ds.columns:
        if col.kind == NUMERIC:
            cells.append(
                [_format_numeric(v) if ok else null_token for v, ok in zip(col.values, col.valid)]
            )
        else:
            cells.append([t if t is not None else null_token for t in col.tokens()])
    for i in range(ds.n_rows):
        writer.writerow([c[i] for c in cells])
    return out.getvalue()


def fingerprint(ds: Dataset) -> str:
    """64-bit content fingerprint: column names, kinds, row count, sampled values.

    Detects accidental dataset mismatch when loading saved exploration state;
    not meant to resist adversarial tampering.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(ds.n_rows).encode())
    sample_idx = np.unique(np.linspace(0, max(ds.n_rows - 1, 0), num=min(ds.n_rows, 257)).astype(np.int64))
    for col in ds.columns:
        h.update(col.name.encode())
        h.update(col.kind.encode())
        h.update(np.ascontiguousarray(col.valid[sample_idx]).tobytes())
        if col.kind == NUMERIC:
            h.update(np.ascontiguousarray(col.values[sample_idx], dtype="<f8").tobytes())
        else:
            for i in sample_idx:
                if col.valid[i]:
                    h.update(col.dictionary[col.values[i]].encode())
                h.update(b"\x1f")
    return h.hexdigest()
