"""Temporal edge-list parsing, time slicing, and train/test splitting.

Input files are SNAP-style: one ``src dst ts`` triple per line, ``#`` comment
lines ignored.  Node ids are remapped to dense integers in first-appearance
order; self-loops are dropped at parse time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class TemporalEdgeList:
    """Events sorted non-decreasing by timestamp over dense node ids."""

    events: tuple  # ((src, dst, ts), ...)
    n_nodes: int


@dataclass(frozen=True)
class SnapshotSequence:
    """Per-slice deduplicated directed edge sets over a shared node registry."""

    snapshots: tuple  # (frozenset of (src, dst), ...)
    n_nodes: int


def parse_edge_list(text: str) -> TemporalEdgeList:
    """Parse a line-oriented temporal edge list into sorted, densely remapped events."""
    ids: dict[int, int] = {}
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'src dst ts', got {raw!r}")
        try:
            src, dst, ts = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed integer in {raw!r}") from None
        if src == dst:
            continue
        for node in (src, dst):
            if node not in ids:
                ids[node] = len(ids)
        events.append((ids[src], ids[dst], ts))
    if not events:
        raise ValueError("empty edge list")
    events.sort(key=lambda e: e[2])
    return TemporalEdgeList(events=tuple(events), n_nodes=len(ids))


def slice_snapshots(tel: TemporalEdgeList, n_slices: int) -> SnapshotSequence:
    """Partition the time range into equal-width bins (last bin closed)."""
    if n_slices <= 0:
        raise ValueError(f"n_slices must be positive, got {n_slices}")
    ts_min = tel.events[0][2]
    ts_max = tel.events[-1][2]
    span = ts_max - ts_min
    buckets = [set() for _ in range(n_slices)]
    for src, dst, ts in tel.events:
        if ts == ts_max:
            idx = n_slices - 1
        else:
            idx = min(int(math.floor((ts - ts_min) * n_slices / span)), n_slices - 1)
        buckets[idx].add((src, dst))
    return SnapshotSequence(snapshots=tuple(frozenset(b) for b in buckets),
                            n_nodes=tel.n_nodes)


def split_train_test(seq: SnapshotSequence, n_train: int):
    """First ``n_train`` snapshots train, the remainder test; registry shared."""
    total = len(seq.snapshots)
    if not 1 <= n_train < total:
        raise ValueError(f"n_train must be in [1, {total - 1}], got {n_train}")
    train = SnapshotSequence(snapshots=seq.snapshots[:n_train], n_nodes=seq.n_nodes)
    test = SnapshotSequence(snapshots=seq.snapshots[n_train:], n_nodes=seq.n_nodes)
    return train, test
