"""tabinsight: sketch-backed insight recommendations for tabular data."""

from .classes import CLASS_SPECS, InsightClassSpec, resolve_class
from .dataset import (
    Column,
    Dataset,
    MomentSummary,
    fingerprint,
    ingest_csv,
    merge_summaries,
    moment_summary,
    to_csv,
)
from .engine import Engine
from .errors import (
    EmptyDatasetError,
    FingerprintMismatch,
    IngestError,
    NotReadyError,
    QueryError,
    SketchError,
    StateError,
    TabinsightError,
)
from .query import (
    InsightDescriptor,
    InsightQuery,
    OverviewResult,
    neighborhood,
    overview,
    rank_insights,
)
from .viz import VisualizationPayload, build_payload

__version__ = "0.1.0"

__all__ = [
    "Column",
    "Dataset",
    "MomentSummary",
    "fingerprint",
    "ingest_csv",
    "merge_summaries",
    "moment_summary",
    "to_csv",
    "InsightClassSpec",
    "CLASS_SPECS",
    "resolve_class",
    "Engine",
    "InsightQuery",
    "InsightDescriptor",
    "OverviewResult",
    "rank_insights",
    "neighborhood",
    "overview",
    "VisualizationPayload",
    "build_payload",
    "TabinsightError",
    "IngestError",
    "EmptyDatasetError",
    "QueryError",
    "SketchError",
    "StateError",
    "FingerprintMismatch",
    "NotReadyError",
    "__version__",
]
