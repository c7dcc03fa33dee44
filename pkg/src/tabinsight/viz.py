"""Chart payload builders: plain-data series ready for any renderer.

Each insight class maps to one chart shape. Builders return frozen
dataclasses of lists and floats (JSON-friendly via dataclasses.asdict), and
every stochastic choice (scatter subsampling) is seeded from the engine so
repeated calls yield identical payloads.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .classes import BOX_PLOT, HISTOGRAM, PARETO_CHART, SCATTER_FIT, resolve_class
from .engine import Engine
from .errors import QueryError
from .query import InsightDescriptor
from .sketch.reservoir import quantile_estimates

MAX_HISTOGRAM_BINS = 50
MAX_SCATTER_POINTS = 2000


@dataclass(frozen=True)
class HistogramSeries:
    edges: tuple[float, ...]  # len(counts) + 1, ascending
    counts: tuple[int, ...]


@dataclass(frozen=True)
class BoxPlotSeries:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    outliers: tuple[float, ...]


@dataclass(frozen=True)
class ParetoSeries:
    categories: tuple[str, ...]
    frequencies: tuple[float, ...]  # relative, descending
    cumulative: tuple[float, ...]  # running sum, ends at 1


@dataclass(frozen=True)
class ScatterSeries:
    x: tuple[float, ...]
    y: tuple[float, ...]
    slope: float
    intercept: float
    sampled: bool  # True when the points are a subsample of the joint rows


@dataclass(frozen=True)
class VisualizationPayload:
    viz_kind: str
    attributes: tuple[str, ...]
    series: HistogramSeries | BoxPlotSeries | ParetoSeries | ScatterSeries


def _numeric_values(engine: Engine, name: str) -> np.ndarray:
    col = engine.dataset.column(name)
    vals = col.valid_values()
    if vals.size == 0:
        raise QueryError(f"cannot chart {name!r}: no valid rows")
    return vals


def histogram_series(engine: Engine, name: str) -> HistogramSeries:
    vals = _numeric_values(engine, name)
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        # a constant column still gets one bin holding every row
        return HistogramSeries(edges=(lo - 0.5, hi + 0.5), counts=(int(vals.size),))
    bins = min(int(np.ceil(np.sqrt(vals.size))), MAX_HISTOGRAM_BINS)
    counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    return HistogramSeries(
        edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
    )


def box_plot_series(engine: Engine, name: str) -> BoxPlotSeries:
    vals = _numeric_values(engine, name)
    qs = quantile_estimates(
        engine.dataset.column(name), (0.0, 0.25, 0.5, 0.75, 1.0), seed=engine.seed
    )
    mu = float(vals.mean())
    sd = float(vals.std())
    if sd > 0:
        flagged = vals[np.abs((vals - mu) / sd) > engine.outlier_config.z_threshold]
    else:
        flagged = vals[:0]
    return BoxPlotSeries(
        minimum=float(qs[0]),
        q1=float(qs[1]),
        median=float(qs[2]),
        q3=float(qs[3]),
        maximum=float(qs[4]),
        outliers=tuple(float(v) for v in flagged),
    )


def pareto_series(engine: Engine, name: str) -> ParetoSeries:
    col = engine.dataset.column(name)
    codes = col.values[col.valid]
    if codes.size == 0:
        raise QueryError(f"cannot chart {name!r}: no valid rows")
    counts = np.bincount(codes, minlength=len(col.dictionary))
    # descending by count; first-seen dictionary order breaks ties
    order = sorted(range(len(counts)), key=lambda i: (-counts[i], i))
    order = [i for i in order if counts[i] > 0]
    freqs = [counts[i] / codes.size for i in order]
    return ParetoSeries(
        categories=tuple(col.dictionary[i] for i in order),
        frequencies=tuple(float(f) for f in freqs),
        cumulative=tuple(float(c) for c in np.cumsum(freqs)),
    )


def scatter_series(engine: Engine, x_name: str, y_name: str) -> ScatterSeries:
    ds = engine.dataset
    x_col, y_col = ds.column(x_name), ds.column(y_name)
    joint = x_col.valid & y_col.valid
    xs = x_col.values[joint]
    ys = y_col.values[joint]
    if xs.size == 0:
        raise QueryError(f"cannot chart {x_name!r} vs {y_name!r}: no jointly valid rows")
    # fit line always comes from the full joint data, never the subsample
    mx, my = float(xs.mean()), float(ys.mean())
    vx = float(((xs - mx) ** 2).mean())
    if vx > 0:
        slope = float(((xs - mx) * (ys - my)).mean()) / vx
        intercept = my - slope * mx
    else:
        slope, intercept = 0.0, my
    sampled = xs.size > MAX_SCATTER_POINTS
    if sampled:
        pair_seed = (engine.seed ^ zlib.crc32(f"{x_name}\x1f{y_name}".encode())) & 0xFFFFFFFF
        rng = np.random.Generator(np.random.PCG64(pair_seed))
        keep = np.sort(rng.choice(xs.size, size=MAX_SCATTER_POINTS, replace=False))
        xs, ys = xs[keep], ys[keep]
    return ScatterSeries(
        x=tuple(float(v) for v in xs),
        y=tuple(float(v) for v in ys),
        slope=slope,
        intercept=intercept,
        sampled=sampled,
    )


def build_payload(engine: Engine, descriptor: InsightDescriptor) -> VisualizationPayload:
    """The chart for one insight, shaped by its class's visualization kind."""
    spec = resolve_class(descriptor.class_id)
    attrs = tuple(descriptor.attributes)
    if len(attrs) != spec.arity:
        raise QueryError(
            f"{spec.class_id} charts take {spec.arity} attribute(s), got {len(attrs)}"
        )
    if spec.viz_kind == HISTOGRAM:
        series = histogram_series(engine, attrs[0])
    elif spec.viz_kind == BOX_PLOT:
        series = box_plot_series(engine, attrs[0])
    elif spec.viz_kind == PARETO_CHART:
        series = pareto_series(engine, attrs[0])
    elif spec.viz_kind == SCATTER_FIT:
        series = scatter_series(engine, attrs[0], attrs[1])
    else:
        raise QueryError(f"no chart builder for {spec.viz_kind!r}")
    return VisualizationPayload(viz_kind=spec.viz_kind, attributes=attrs, series=series)
