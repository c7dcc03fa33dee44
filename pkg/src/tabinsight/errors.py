"""Exception types shared across the engine."""


class TabinsightError(Exception):
    """Base class for all engine errors."""


class IngestError(TabinsightError):
    """Structural problem in delimited input (ragged row, bad header)."""


class EmptyDatasetError(IngestError):
    """Input contained no data rows."""


class QueryError(TabinsightError):
    """Invalid insight query: unknown class, attribute, or bad parameters."""


class SketchError(TabinsightError):
    """Invalid sketch operation (merge mismatch, empty finalize, width mismatch)."""


class StateError(TabinsightError):
    """Exploration-state document problem (malformed, wrong version)."""


class FingerprintMismatch(StateError):
    """Saved state does not match the dataset it is being loaded against."""


class NotReadyError(TabinsightError):
    """Dataset precompute has not finished yet."""
