"""Mergeable sketches: random-hyperplane signs, heavy hitters, reservoirs."""

from .frequent import (
    CounterEntry,
    FrequentItemsSketch,
    build_frequent_items,
    capacity_for,
    estimated_rel_freq,
)
from .hyperplane import (
    HyperplaneConfig,
    HyperplaneSketch,
    SignVector,
    build_hyperplane,
    build_hyperplane_many,
    column_grid,
    default_width,
    estimate_all_pairs,
    estimate_correlation,
    finalize,
    hamming,
    merge_hyperplane,
    sketch_from_bytes,
    sketch_to_bytes,
)
from .reservoir import DEFAULT_RESERVOIR, quantile_estimates, reservoir_sample
from .rng import normal_components, quantized_normal_components

__all__ = [
    "HyperplaneConfig",
    "HyperplaneSketch",
    "SignVector",
    "build_hyperplane",
    "build_hyperplane_many",
    "column_grid",
    "default_width",
    "estimate_all_pairs",
    "estimate_correlation",
    "finalize",
    "hamming",
    "merge_hyperplane",
    "sketch_from_bytes",
    "sketch_to_bytes",
    "CounterEntry",
    "FrequentItemsSketch",
    "build_frequent_items",
    "capacity_for",
    "estimated_rel_freq",
    "DEFAULT_RESERVOIR",
    "quantile_estimates",
    "reservoir_sample",
    "normal_components",
    "quantized_normal_components",
]
