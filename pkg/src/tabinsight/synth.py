"""Synthetic datasets with planted statistical structure.

Plants are small colon-separated specs (the CLI's --plant flag):

    rho:<val>:<a>,<b>[,<c>...]   equicorrelated numeric block at pairwise rho
    skew:<val>:<a>               numeric column with skewness near val
    hh:<share>:<a>               categorical column whose top item has that share
    outlier:<z>:<a>              numeric column with a few points near z sigma

Planted columns come first in spec order; the remaining column budget is
filled with independent standard normals named x0, x1, ... The ground truth
(the parsed plants plus seed and shape) is returned alongside the dataset so
tests and benchmarks can use it as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import CATEGORICAL, NUMERIC, Column, Dataset

TRUTH_SCHEMA_VERSION = 1

PLANT_KINDS = ("rho", "skew", "hh", "outlier")

# fraction of rows pushed out to the planted z-score, at least 3 rows
OUTLIER_SHARE = 0.002


@dataclass(frozen=True)
class PlantSpec:
    kind: str
    value: float
    attributes: tuple[str, ...]


def parse_plant(text: str) -> PlantSpec:
    """Parse one --plant spec; ValueError carries a usable diagnostic."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(
            f"plant spec {text!r} is not of the form kind:value:attributes"
        )
    kind, raw_value, raw_attrs = parts
    if kind not in PLANT_KINDS:
        raise ValueError(
            f"unknown plant kind {kind!r} (one of {', '.join(PLANT_KINDS)})"
        )
    try:
        value = float(raw_value)
    except ValueError:
        raise ValueError(f"plant value {raw_value!r} is not a number") from None
    attrs = tuple(a.strip() for a in raw_attrs.split(","))
    if any(not a for a in attrs):
        raise ValueError(f"plant spec {text!r} has an empty attribute name")
    if len(set(attrs)) != len(attrs):
        raise ValueError(f"plant spec {text!r} repeats an attribute")
    if kind == "rho":
        if len(attrs) < 2:
            raise ValueError("rho plants need at least two attributes")
        if not -1.0 < value < 1.0:
            raise ValueError(f"rho must be inside (-1, 1), got {value}")
        if value < 0 and len(attrs) > 2:
            raise ValueError("negative rho is only possible for a pair")
    else:
        if len(attrs) != 1:
            raise ValueError(f"{kind} plants take exactly one attribute")
        if kind == "hh" and not 0.0 < value < 1.0:
            raise ValueError(f"hh share must be inside (0, 1), got {value}")
        if kind == "outlier" and value <= 0:
            raise ValueError(f"outlier z must be positive, got {value}")
    return PlantSpec(kind=kind, value=value, attributes=attrs)


def _rho_block(rng: np.random.Generator, rows: int, spec: PlantSpec):
    rho = spec.value
    if rho < 0:
        a = rng.standard_normal(rows)
        b = rho * a + math.sqrt(1.0 - rho * rho) * rng.standard_normal(rows)
        return [a, b]
    shared = rng.standard_normal(rows)
    out = []
    for _ in spec.attributes:
        own = rng.standard_normal(rows)
        out.append(math.sqrt(rho) * shared + math.sqrt(1.0 - rho) * own)
    return out


def _skewed(rng: np.random.Generator, rows: int, value: float) -> np.ndarray:
    if value == 0.0:
        return rng.standard_normal(rows)
    # gamma(shape) has skewness 2/sqrt(shape); mirror for the left tail
    shape = (2.0 / abs(value)) ** 2
    draw = rng.gamma(shape, 1.0, size=rows)
    draw = (draw - shape) / math.sqrt(shape)
    return draw if value > 0 else -draw


def _heavy_hitter(rng: np.random.Generator, rows: int, share: float) -> list[str]:
    n_rest = 19
    hot = rng.random(rows) < share
    rest = rng.integers(0, n_rest, size=rows)
    return ["hot" if h else f"v{r}" for h, r in zip(hot, rest)]


def _with_outliers(rng: np.random.Generator, rows: int, z: float) -> np.ndarray:
    vals = rng.standard_normal(rows)
    n_out = max(3, int(round(OUTLIER_SHARE * rows)))
    where = rng.choice(rows, size=min(n_out, rows), replace=False)
    signs = np.where(rng.random(where.size) < 0.5, -1.0, 1.0)
    vals[where] = signs * z
    return vals


def generate(
    rows: int,
    cols: int,
    plants: list[PlantSpec] | None = None,
    seed: int = 0,
    name: str = "synth",
) -> tuple[Dataset, dict]:
    """Build the dataset and its ground-truth document."""
    plants = list(plants or [])
    if rows < 1:
        raise ValueError(f"rows must be positive, got {rows}")
    planted_names = [a for p in plants for a in p.attributes]
    if len(set(planted_names)) != len(planted_names):
        raise ValueError("plants reference the same attribute twice")
    if cols < len(planted_names):
        raise ValueError(
            f"{len(planted_names)} planted columns do not fit in cols={cols}"
        )
    rng = np.random.default_rng(seed)
    columns: list[Column] = []

    def add_numeric(colname: str, vals: np.ndarray) -> None:
        columns.append(
            Column(
                name=colname,
                kind=NUMERIC,
                values=np.asarray(vals, dtype=np.float64),
                valid=np.ones(rows, dtype=bool),
                dictionary=(),
            )
        )

    for spec in plants:
        if spec.kind == "rho":
            for colname, vals in zip(spec.attributes, _rho_block(rng, rows, spec)):
                add_numeric(colname, vals)
        elif spec.kind == "skew":
            add_numeric(spec.attributes[0], _skewed(rng, rows, spec.value))
        elif spec.kind == "outlier":
            add_numeric(spec.attributes[0], _with_outliers(rng, rows, spec.value))
        else:  # hh
            tokens = _heavy_hitter(rng, rows, spec.value)
            seen: dict[str, int] = {}
            codes = np.empty(rows, dtype=np.int32)
            for i, tok in enumerate(tokens):
                codes[i] = seen.setdefault(tok, len(seen))
            columns.append(
                Column(
                    name=spec.attributes[0],
                    kind=CATEGORICAL,
                    values=codes,
                    valid=np.ones(rows, dtype=bool),
                    dictionary=tuple(seen),
                )
            )
    for i in range(cols - len(planted_names)):
        add_numeric(f"x{i}", rng.standard_normal(rows))
    ds = Dataset(name=name, columns=tuple(columns), n_rows=rows)
    truth = {
        "schema_version": TRUTH_SCHEMA_VERSION,
        "seed": seed,
        "rows": rows,
        "columns": [c.name for c in columns],
        "plants": [
            {"kind": p.kind, "value": p.value, "attributes": list(p.attributes)}
            for p in plants
        ],
    }
    return ds, truth


def planted_pairs(truth: dict) -> list[tuple[str, str, float]]:
    """Expand rho plants into the individual (a, b, rho) pairs they promise."""
    out = []
    for plant in truth["plants"]:
        if plant["kind"] != "rho":
            continue
        attrs = plant["attributes"]
        for i in range(len(attrs)):
            for j in range(i + 1, len(attrs)):
                out.append((attrs[i], attrs[j], float(plant["value"])))
    return out
