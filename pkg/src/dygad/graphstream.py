"""Timestamped edge streams partitioned into fixed-size snapshots.

Parses whitespace- or comma-separated ``src dst timestamp`` lines, orders
events by timestamp (stable), deduplicates undirected edges globally, and
chunks the surviving stream into snapshots of a fixed edge count.  Node ids
are remapped to a dense ``0..n-1`` range in order of first appearance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "EdgeEvent",
    "Snapshot",
    "GraphStream",
    "LabeledTestEdge",
    "ingest_edge_list",
    "split_train_test",
    "inject_anomalies",
]


@dataclass(frozen=True)
class EdgeEvent:
    """One raw interaction: source node, destination node, integer timestamp."""

    src: int
    dst: int
    time: int


@dataclass(frozen=True)
class LabeledTestEdge:
    """An edge to score: (u, v) pair, snapshot index, and 0/1 anomaly label."""

    edge: tuple[int, int]
    snapshot: int
    label: int


class Snapshot:
    """One fixed-size chunk of the deduplicated edge stream.

    Edges are stored as ``(u, v)`` tuples with ``u < v`` in stream order.
    Adjacency structures are built lazily and cached.
    """

    def __init__(self, index: int, edges: Sequence[tuple[int, int]], node_count: int):
        self.index = index
        self.edges = [(int(u), int(v)) for u, v in edges]
        self.node_count = node_count
        self.edge_set = frozenset(self.edges)
        self._degree = None
        self._active = None
        self._csr = None

    def __len__(self) -> int:
        return len(self.edges)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Snapshot(index={self.index}, edges={len(self.edges)})"

    @property
    def edge_array(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` int64 array in stream order."""
        return np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def degree(self) -> np.ndarray:
        """Per-node degree within this snapshot, length ``node_count``."""
        if self._degree is None:
            deg = np.zeros(self.node_count, dtype=np.int64)
            if self.edges:
                e = self.edge_array
                np.add.at(deg, e[:, 0], 1)
                np.add.at(deg, e[:, 1], 1)
            self._degree = deg
        return self._degree

    @property
    def active_nodes(self) -> np.ndarray:
        """Sorted ids of nodes with degree >= 1 in this snapshot."""
        if self._active is None:
            if self.edges:
                self._active = np.unique(self.edge_array)
            else:
                self._active = np.empty(0, dtype=np.int64)
        return self._active

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Symmetric adjacency over the full node universe as (indptr, indices)."""
        if self._csr is None:
            n = self.node_count
            if not self.edges:
                self._csr = (np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64))
            else:
                e = self.edge_array
                both = np.concatenate([e, e[:, ::-1]])
                order = np.lexsort((both[:, 1], both[:, 0]))
                both = both[order]
                counts = np.bincount(both[:, 0], minlength=n)
                indptr = np.zeros(n + 1, dtype=np.int64)
                np.cumsum(counts, out=indptr[1:])
                self._csr = (indptr, np.ascontiguousarray(both[:, 1]))
        return self._csr

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.edge_set


class GraphStream:
    """A sequence of snapshots over a shared, densely remapped node universe."""

    def __init__(self, snapshots: list[Snapshot], node_ids: Sequence[int] | None = None):
        self.snapshots = snapshots
        # Original id for each dense id; identity when built synthetically.
        if node_ids is None:
            n = snapshots[0].node_count if snapshots else 0
            node_ids = range(n)
        self.node_ids = list(node_ids)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def snapshot_count(self) -> int:
        return len(self.snapshots)

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, t: int) -> Snapshot:
        return self.snapshots[t]

    @classmethod
    def from_snapshot_edges(
        cls, edge_lists: Iterable[Sequence[tuple[int, int]]], node_count: int
    ) -> "GraphStream":
        """Build a stream directly from per-snapshot edge lists.

        Endpoints must already be dense ids in ``[0, node_count)``; self-loops
        and within-snapshot duplicates are rejected.
        """
        snapshots = []
        for idx, edges in enumerate(edge_lists):
            norm = []
            for u, v in edges:
                u, v = int(u), int(v)
                if u == v:
                    raise DataError(f"snapshot {idx}: self-loop on node {u}")
                if not (0 <= u < node_count and 0 <= v < node_count):
                    raise DataError(f"snapshot {idx}: node id out of range in ({u}, {v})")
                norm.append((min(u, v), max(u, v)))
            if len(set(norm)) != len(norm):
                raise DataError(f"snapshot {idx}: duplicate edges")
            snapshots.append(Snapshot(idx, norm, node_count))
        return cls(snapshots, range(node_count))

    def content_hash(self) -> str:
        """Short stable hash of the node universe and every snapshot's edges."""
        h = hashlib.sha256()
        h.update(str(self.node_count).encode())
        for snap in self.snapshots:
            h.update(b"|")
            h.update(snap.edge_array.tobytes())
        return h.hexdigest()[:16]

    def manifest(self) -> dict:
        """Summary used by the CLI: per-snapshot edge/node counts plus totals."""
        return {
            "node_count": self.node_count,
            "snapshot_count": self.snapshot_count,
            "edge_count": self.edge_count,
            "snapshots": [
                {
                    "index": s.index,
                    "edges": len(s),
                    "active_nodes": int(s.active_nodes.size),
                }
                for s in self.snapshots
            ],
        }


def _parse_line(line: str, lineno: int) -> tuple[int, int, int]:
    if "," in line:
        parts = [p.strip() for p in line.split(",")]
    else:
        parts = line.split()
    if len(parts) != 3:
        raise DataError(f"line {lineno}: expected 3 fields, got {len(parts)}")
    try:
        src, dst, ts = (int(p) for p in parts)
    except ValueError:
        raise DataError(f"line {lineno}: fields must be integers: {line!r}") from None
    if ts < 0:
        raise DataError(f"line {lineno}: negative timestamp {ts}")
    return src, dst, ts


def parse_edge_events(path: str) -> list[EdgeEvent]:
    """Read raw events from an edge-list file.

    Blank lines and ``#``/``%`` comment lines are skipped; anything else must
    be exactly three integer fields separated by whitespace or commas.
    """
    events = []
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open edge list {path!r}: {exc}") from None
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line[0] in "#%":
                continue
            src, dst, ts = _parse_line(line, lineno)
            events.append(EdgeEvent(src, dst, ts))
    if not events:
        raise DataError(f"edge list {path!r} contains no events")
    return events


def build_stream(events: Sequence[EdgeEvent], snapshot_size: int) -> GraphStream:
    """Order, deduplicate, remap, and chunk raw events into a GraphStream."""
    if snapshot_size <= 0:
        raise ConfigError(f"snapshot size must be positive, got {snapshot_size}")

    ordered = sorted(events, key=lambda e: e.time)  # stable: file order on ties

    node_map: dict[int, int] = {}
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []
    for ev in ordered:
        if ev.src == ev.dst:
            continue
        for orig in (ev.src, ev.dst):
            if orig not in node_map:
                node_map[orig] = len(node_map)
        u, v = node_map[ev.src], node_map[ev.dst]
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edges.append(key)

    n = len(node_map)
    snapshots = [
        Snapshot(i, edges[start : start + snapshot_size], n)
        for i, start in enumerate(range(0, len(edges), snapshot_size))
    ]
    node_ids = [None] * n
    for orig, dense in node_map.items():
        node_ids[dense] = orig
    return GraphStream(snapshots, node_ids)


def ingest_edge_list(path: str, snapshot_size: int) -> GraphStream:
    """Parse an edge-list file and chunk it into snapshots of ``snapshot_size`` edges."""
    return build_stream(parse_edge_events(path), snapshot_size)


def split_train_test(stream: GraphStream, train_ratio: float) -> tuple[range, range]:
    """Partition snapshot indices into (train, test) by a ratio on snapshot count."""
    if not 0.0 < train_ratio < 1.0:
        raise ConfigError(f"train ratio must lie in (0, 1), got {train_ratio}")
    t = stream.snapshot_count
    if t < 2:
        raise DataError(f"need at least 2 snapshots to split, got {t}")
    cut = int(np.floor(t * train_ratio))
    if cut == 0 or cut == t:
        raise DataError(
            f"train ratio {train_ratio} leaves an empty side for {t} snapshots"
        )
    return range(0, cut), range(cut, t)


def inject_anomalies(
    stream: GraphStream,
    test_snapshots: Iterable[int],
    anomaly_pct: float,
    seed: int,
) -> list[LabeledTestEdge]:
    """Mix synthetic anomalous pairs into each test snapshot's edge list.

    For a snapshot with ``m`` edges, draws ``round(anomaly_pct * m)`` uniform
    node pairs that do not appear in that snapshot (and are mutually
    distinct), labels them 1, and labels the real edges 0.  Draw order is
    deterministic for a fixed seed.
    """
    if not 0.0 < anomaly_pct < 1.0:
        raise ConfigError(f"anomaly percentage must lie in (0, 1), got {anomaly_pct}")
    n = stream.node_count
    if n < 2:
        raise DataError("need at least 2 nodes to build anomalous pairs")

    rng = np.random.default_rng(seed)
    labeled: list[LabeledTestEdge] = []
    for t in test_snapshots:
        snap = stream.snapshots[t]
        for u, v in snap.edges:
            labeled.append(LabeledTestEdge((u, v), t, 0))
        needed = int(np.floor(anomaly_pct * len(snap.edges) + 0.5))
        if needed == 0:
            continue
        chosen: list[tuple[int, int]] = []
        chosen_set: set[tuple[int, int]] = set()
        budget = 100 * needed
        drawn = 0
        while len(chosen) < needed:
            if drawn >= budget:
                raise DataError(
                    f"snapshot {t}: could not find {needed} absent pairs "
                    f"after {drawn} draws"
                )
            batch = min(max(2 * needed, 64), budget - drawn)
            cand = rng.integers(0, n, size=(batch, 2))
            drawn += batch
            for u, v in cand:
                if u == v:
                    continue
                key = (int(min(u, v)), int(max(u, v)))
                if key in snap.edge_set or key in chosen_set:
                    continue
                chosen.append(key)
                chosen_set.add(key)
                if len(chosen) == needed:
                    break
        for u, v in chosen:
            labeled.append(LabeledTestEdge((u, v), t, 1))
    return labeled
