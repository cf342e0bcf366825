"""Graph diffusion operators and diffusion-guided substructure sampling.

Diffusion matrices are computed densely over each snapshot's active nodes
(degree >= 1); an inactive node behaves as an isolated self-loop, i.e. its
row/column is the identity.  Edge connectivity is the sum of the two target
rows, and each target edge gets a window of the top-k most connected
non-target nodes per snapshot, together with rank and hop-distance indices
consumed by the encoder.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ConfigError, DataError, NumericalError
from .graphstream import GraphStream, Snapshot

__all__ = [
    "DIST_CAP",
    "BETA_CLAMP",
    "DiffusionMatrix",
    "ConnectivityVector",
    "SubstructureSample",
    "WindowBatch",
    "compute_ppr",
    "compute_heat",
    "compute_diffusion",
    "edge_connectivity",
    "sample_substructure",
    "sample_batch",
    "DiffusionCache",
]

# Farthest hop distance kept distinct; anything beyond (or unreachable) falls
# into bucket DIST_CAP + 1.
DIST_CAP = 16

# Heat kernels with beta above this are numerically indistinguishable from the
# stationary limit; clamp to keep expm well-conditioned.
BETA_CLAMP = 100.0


class DiffusionMatrix:
    """Dense diffusion over a snapshot's active nodes, with identity elsewhere."""

    __slots__ = ("kind", "param", "snapshot_index", "node_count", "active", "block", "_pos")

    def __init__(self, kind, param, snapshot_index, node_count, active, block):
        self.kind = kind
        self.param = float(param)
        self.snapshot_index = snapshot_index
        self.node_count = node_count
        self.active = np.asarray(active, dtype=np.int64)
        self.block = np.ascontiguousarray(block, dtype=np.float64)
        pos = np.full(node_count, -1, dtype=np.int64)
        pos[self.active] = np.arange(self.active.size, dtype=np.int64)
        self._pos = pos

    def row(self, v: int) -> np.ndarray:
        """Diffusion row of node ``v`` over the full universe."""
        if not 0 <= v < self.node_count:
            raise DataError(f"node id {v} out of range [0, {self.node_count})")
        out = np.zeros(self.node_count)
        p = self._pos[v]
        if p >= 0:
            out[self.active] = self.block[p]
        else:
            out[v] = 1.0
        return out

    def dense(self) -> np.ndarray:
        """Materialize the full ``n x n`` matrix (tests and small graphs only)."""
        n = self.node_count
        out = np.zeros((n, n))
        out[np.ix_(self.active, self.active)] = self.block
        inactive = np.setdiff1d(np.arange(n), self.active, assume_unique=True)
        out[inactive, inactive] = 1.0
        return out


@dataclass(frozen=True)
class ConnectivityVector:
    """Connectivity of every node to a target pair: row(v1) + row(v2)."""

    target: tuple[int, int]
    values: np.ndarray


@dataclass(frozen=True)
class SubstructureSample:
    """Sampled window for one target edge, flattened to tau * (k + 2) rows.

    Rows are grouped by window snapshot in chronological order; within a
    group the order is [v1, v2, contexts by descending connectivity].
    ``ranks``, ``distances``, and ``rel_times`` are the integer indices the
    encoder turns into vectors.  Distances are capped hop counts in the
    window snapshot's graph: 0 for the first target, the targets' separation
    for the second target (the feature that tells a real edge's window apart
    from an absent pair's), and the min depth to either target for contexts.
    """

    target: tuple[int, int]
    snapshot: int
    tau: int
    k: int
    node_ids: np.ndarray
    ranks: np.ndarray
    distances: np.ndarray
    rel_times: np.ndarray


@dataclass(frozen=True)
class WindowBatch:
    """Windows for a batch of target pairs; arrays have shape (B, tau * (k + 2))."""

    pairs: np.ndarray
    snapshot: int
    tau: int
    k: int
    node_ids: np.ndarray
    ranks: np.ndarray
    distances: np.ndarray
    rel_times: np.ndarray

    def __len__(self) -> int:
        return self.pairs.shape[0]


def _active_adjacency(snapshot: Snapshot) -> tuple[np.ndarray, np.ndarray]:
    """Dense adjacency restricted to active nodes, plus their degrees."""
    active = snapshot.active_nodes
    na = active.size
    adj = np.zeros((na, na))
    if na:
        e = snapshot.edge_array
        rows = np.searchsorted(active, e[:, 0])
        cols = np.searchsorted(active, e[:, 1])
        adj[rows, cols] = 1.0
        adj[cols, rows] = 1.0
    return adj, adj.sum(axis=1)


def compute_ppr(snapshot: Snapshot, alpha: float) -> DiffusionMatrix:
    """Personalized-PageRank diffusion: alpha * (I - (1 - alpha) * D^-1/2 A D^-1/2)^-1."""
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"restart probability must lie in (0, 1), got {alpha}")
    adj, deg = _active_adjacency(snapshot)
    na = adj.shape[0]
    if na == 0:
        block = np.zeros((0, 0))
    else:
        inv_sqrt = 1.0 / np.sqrt(deg)
        sym = adj * inv_sqrt[:, None] * inv_sqrt[None, :]
        lhs = np.eye(na) - (1.0 - alpha) * sym
        try:
            block = alpha * scipy.linalg.solve(lhs, np.eye(na), assume_a="pos")
        except scipy.linalg.LinAlgError as exc:  # pragma: no cover - SPD by construction
            raise NumericalError(f"diffusion solve failed: {exc}") from None
        block = np.maximum(block, 0.0)  # clip solver noise; true values are >= 0
        block = (block + block.T) / 2.0  # enforce the symmetry of the exact result
    return DiffusionMatrix("ppr", alpha, snapshot.index, snapshot.node_count,
                           snapshot.active_nodes, block)


def compute_heat(snapshot: Snapshot, beta: float) -> DiffusionMatrix:
    """Heat-kernel diffusion: exp(beta * (A D^-1 - I)), column-stochastic."""
    if beta <= 0.0:
        raise ConfigError(f"heat scale must be positive, got {beta}")
    beta = min(beta, BETA_CLAMP)
    adj, deg = _active_adjacency(snapshot)
    na = adj.shape[0]
    if na == 0:
        block = np.zeros((0, 0))
    else:
        trans = adj / deg[None, :]  # column-normalized random walk
        block = scipy.linalg.expm(beta * (trans - np.eye(na)))
        if not np.all(np.isfinite(block)):
            raise NumericalError("heat kernel produced non-finite entries")
    return DiffusionMatrix("heat", beta, snapshot.index, snapshot.node_count,
                           snapshot.active_nodes, block)


def compute_diffusion(snapshot: Snapshot, kind: str, param: float) -> DiffusionMatrix:
    if kind == "ppr":
        return compute_ppr(snapshot, param)
    if kind == "heat":
        return compute_heat(snapshot, param)
    raise ConfigError(f"unknown diffusion kind {kind!r} (expected 'ppr' or 'heat')")


def edge_connectivity(diffusion: DiffusionMatrix, v1: int, v2: int) -> ConnectivityVector:
    """Connectivity of every node to the target pair (v1, v2)."""
    if v1 == v2:
        raise DataError(f"target endpoints must differ, got ({v1}, {v2})")
    values = diffusion.row(v1) + diffusion.row(v2)
    return ConnectivityVector((v1, v2), values)


class DiffusionCache:
    """Per-snapshot diffusion matrices, computed on demand and optionally persisted.

    Disk entries are keyed by stream content hash, snapshot index, kind, and
    parameter, so a cache directory can be shared across runs.
    """

    def __init__(self, stream: GraphStream, kind: str, param: float, cache_dir: str | None = None):
        if kind not in ("ppr", "heat"):
            raise ConfigError(f"unknown diffusion kind {kind!r} (expected 'ppr' or 'heat')")
        self.stream = stream
        self.kind = kind
        self.param = float(param)
        self.cache_dir = cache_dir
        self._mem: dict[int, DiffusionMatrix] = {}
        self._hash = stream.content_hash() if cache_dir else None
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)

    def _path(self, t: int) -> str:
        name = f"{self._hash}_t{t}_{self.kind}_{self.param:g}.npz"
        return os.path.join(self.cache_dir, name)

    def get(self, t: int) -> DiffusionMatrix:
        if t in self._mem:
            return self._mem[t]
        snap = self.stream.snapshots[t]
        if self.cache_dir:
            path = self._path(t)
            if os.path.exists(path):
                with np.load(path) as data:
                    mat = DiffusionMatrix(self.kind, self.param, t, snap.node_count,
                                          data["active"], data["block"])
                self._mem[t] = mat
                return mat
        mat = compute_diffusion(snap, self.kind, self.param)
        if self.cache_dir:
            np.savez(self._path(t), active=mat.active, block=mat.block)
        self._mem[t] = mat
        return mat


def _check_pair(v1: int, v2: int, n: int) -> None:
    if not (0 <= v1 < n and 0 <= v2 < n):
        raise DataError(f"node id out of range in pair ({v1}, {v2})")
    if v1 == v2:
        raise DataError(f"target endpoints must differ, got ({v1}, {v2})")


def sample_batch(
    stream: GraphStream,
    cache: DiffusionCache,
    pairs: np.ndarray,
    t: int,
    k: int,
    tau: int,
    dist_cap: int = DIST_CAP,
) -> WindowBatch:
    """Sample windows for a batch of target pairs anchored at snapshot ``t``."""
    n = stream.node_count
    if k < 1:
        raise ConfigError(f"context size must be >= 1, got {k}")
    if tau < 1:
        raise ConfigError(f"window length must be >= 1, got {tau}")
    if n < k + 2:
        raise DataError(f"need at least k + 2 = {k + 2} nodes, got {n}")
    if t < tau - 1:
        raise DataError(f"snapshot {t} has no full window of length {tau}")
    pairs = np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    for v1, v2 in pairs:
        _check_pair(int(v1), int(v2), n)

    nb = pairs.shape[0]
    k2 = k + 2
    m = tau * k2
    node_ids = np.empty((nb, m), dtype=np.int64)
    ranks = np.empty((nb, m), dtype=np.int64)
    dists = np.empty((nb, m), dtype=np.int64)
    rel_times = np.empty((nb, m), dtype=np.int64)

    for j, i in enumerate(range(t - tau + 1, t + 1)):
        diff = cache.get(i)
        indptr, indices = stream.snapshots[i].csr()
        ctx, rank, dist = _kernels.sample_window(
            diff.block, diff.active, diff._pos, indptr, indices, pairs, k, dist_cap
        )
        lo = j * k2
        node_ids[:, lo : lo + 2] = pairs
        node_ids[:, lo + 2 : lo + k2] = ctx
        ranks[:, lo : lo + k2] = rank
        dists[:, lo : lo + k2] = dist
        rel_times[:, lo : lo + k2] = t - i

    return WindowBatch(
        pairs=pairs, snapshot=t, tau=tau, k=k,
        node_ids=node_ids, ranks=ranks, distances=dists, rel_times=rel_times,
    )


def sample_substructure(
    stream: GraphStream,
    cache: DiffusionCache,
    target: tuple[int, int],
    t: int,
    k: int,
    tau: int,
    dist_cap: int = DIST_CAP,
) -> SubstructureSample:
    """Sample the window for a single target edge at snapshot ``t``."""
    batch = sample_batch(stream, cache, np.asarray([target]), t, k, tau, dist_cap)
    return SubstructureSample(
        target=(int(target[0]), int(target[1])), snapshot=t, tau=tau, k=k,
        node_ids=batch.node_ids[0], ranks=batch.ranks[0],
        distances=batch.distances[0], rel_times=batch.rel_times[0],
    )
