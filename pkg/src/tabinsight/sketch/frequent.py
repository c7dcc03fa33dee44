"""Space-Saving heavy-hitter sketch for categorical columns.

Tracks at most m (item, count, error) entries. When a new item arrives and
the table is full, the entry with the smallest count is evicted and the new
item inherits its count plus one, recording the inherited count as the error.
Classic guarantees follow: tracked counts overestimate by at most the stored
error, any item with true count above processed/m is tracked, and every
item's estimate is within processed/m of its true count.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..dataset import CATEGORICAL, Column

DEFAULT_HEAVY_HITTERS = 16


def capacity_for(k_heavy_hitters: int) -> int:
    """Counter capacity sized for reporting k heavy hitters comfortably."""
    return max(64, 4 * k_heavy_hitters)


@dataclass(frozen=True)
class CounterEntry:
    item: str
    count: int
    error: int

    @property
    def guaranteed(self) -> int:
        return self.count - self.error


class FrequentItemsSketch:
    """Mutable during the single build pass; treat as read-only afterwards."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self.processed = 0
        # item -> [count, error, last-update sequence]
        self._entries: dict[str, list[int]] = {}
        # lazy min-heap of (count, seq, item); stale rows skipped on pop
        self._heap: list[tuple[int, int, str]] = []
        self._seq = 0

    def update(self, item: str) -> None:
        self.processed += 1
        self._seq += 1
        entry = self._entries.get(item)
        if entry is not None:
            entry[0] += 1
            entry[2] = self._seq
            heapq.heappush(self._heap, (entry[0], self._seq, item))
        elif len(self._entries) < self.capacity:
            self._entries[item] = [1, 0, self._seq]
            heapq.heappush(self._heap, (1, self._seq, item))
        else:
            count = self._evict_minimum()
            self._entries[item] = [count + 1, count, self._seq]
            heapq.heappush(self._heap, (count + 1, self._seq, item))
        if len(self._heap) > 16 * self.capacity:
            self._compact()

    def _evict_minimum(self) -> int:
        while True:
            count, seq, item = self._heap[0]
            live = self._entries.get(item)
            if live is not None and live[0] == count and live[2] == seq:
                heapq.heappop(self._heap)
                del self._entries[item]
                return count
            heapq.heappop(self._heap)

    def _compact(self) -> None:
        self._heap = [(e[0], e[2], item) for item, e in self._entries.items()]
        heapq.heapify(self._heap)

    def estimate(self, item: str) -> int:
        entry = self._entries.get(item)
        return entry[0] if entry is not None else 0

    def entries(self) -> list[CounterEntry]:
        """Tracked entries, highest count first; count ties keep the longer-
        tracked item first, which reduces to first-seen order when no
        eviction has touched them."""
        tracked = sorted(self._entries.items(), key=lambda kv: (-kv[1][0], kv[1][2]))
        return [CounterEntry(item, e[0], e[1]) for item, e in tracked]


def build_frequent_items(c: Column, capacity: int) -> FrequentItemsSketch:
    """One pass over the valid rows of a categorical column, in row order."""
    if c.kind != CATEGORICAL:
        raise ValueError(f"column {c.name!r} is not categorical")
    sketch = FrequentItemsSketch(capacity)
    dictionary = c.dictionary
    for code, ok in zip(c.values, c.valid):
        if ok:
            sketch.update(dictionary[code])
    return sketch


def estimated_rel_freq(sketch: FrequentItemsSketch, k: int) -> float:
    """Sketch-side counterpart of the exact top-k relative frequency."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if sketch.processed == 0:
        return 0.0
    counts = sorted((e[0] for e in sketch._entries.values()), reverse=True)
    return sum(counts[:k]) / sketch.processed
