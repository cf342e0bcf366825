"""Synthetic dynamic graphs: a drifting stochastic block model.

Each snapshot draws an independent Erdos-Renyi-style graph where the edge
probability depends on whether the endpoints share a block.  Between
snapshots, each node switches to a uniformly random other block with
probability ``drift``.  Cross-block pairs make natural planted anomalies.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DataError
from .graphstream import GraphStream, LabeledTestEdge, Snapshot

__all__ = ["generate_sbm", "cross_block_anomalies", "write_edge_list"]


def generate_sbm(
    nodes: int = 100,
    blocks: int = 2,
    p_intra: float = 0.1,
    p_inter: float = 0.005,
    snapshots: int = 10,
    drift: float = 0.0,
    seed: int = 0,
) -> tuple[GraphStream, np.ndarray]:
    """Sample a block-model stream; returns (stream, memberships).

    ``memberships`` has shape (snapshots, nodes) and records each node's
    block at each snapshot.  Edges within a snapshot are deduplicated by
    construction (one Bernoulli draw per pair).
    """
    if nodes < 2:
        raise ConfigError(f"need at least 2 nodes, got {nodes}")
    if blocks < 1 or blocks > nodes:
        raise ConfigError(f"block count {blocks} must lie in [1, {nodes}]")
    if snapshots < 1:
        raise ConfigError(f"need at least 1 snapshot, got {snapshots}")
    for name, p in (("p_intra", p_intra), ("p_inter", p_inter)):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{name} must lie in [0, 1], got {p}")
    if not 0.0 <= drift <= 1.0:
        raise ConfigError(f"drift must lie in [0, 1], got {drift}")

    rng = np.random.default_rng(seed)
    membership = np.arange(nodes) * blocks // nodes  # contiguous, near-equal blocks
    iu, jv = np.triu_indices(nodes, k=1)

    memberships = np.empty((snapshots, nodes), dtype=np.int64)
    edge_lists = []
    for t in range(snapshots):
        if t > 0 and drift > 0.0:
            moves = rng.random(nodes) < drift
            if blocks > 1:
                shift = rng.integers(1, blocks, size=nodes)
                membership = np.where(moves, (membership + shift) % blocks, membership)
        memberships[t] = membership
        same = membership[iu] == membership[jv]
        prob = np.where(same, p_intra, p_inter)
        hit = rng.random(iu.size) < prob
        edge_lists.append(list(zip(iu[hit].tolist(), jv[hit].tolist())))

    return GraphStream.from_snapshot_edges(edge_lists, nodes), memberships


def cross_block_anomalies(
    stream: GraphStream,
    memberships: np.ndarray,
    test_snapshots,
    anomaly_pct: float,
    seed: int,
) -> list[LabeledTestEdge]:
    """Label real edges 0 and planted cross-block absent pairs 1.

    Like the generic injector but restricted to pairs whose endpoints sit in
    different blocks at the target snapshot, which makes the planted pairs
    structurally anomalous rather than merely absent.
    """
    if not 0.0 < anomaly_pct < 1.0:
        raise ConfigError(f"anomaly percentage must lie in (0, 1), got {anomaly_pct}")
    n = stream.node_count
    rng = np.random.default_rng(seed)
    labeled: list[LabeledTestEdge] = []
    for t in test_snapshots:
        snap = stream.snapshots[t]
        member = memberships[t]
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
                    f"snapshot {t}: could not find {needed} cross-block pairs "
                    f"after {drawn} draws")
            batch = min(max(2 * needed, 64), budget - drawn)
            cand = rng.integers(0, n, size=(batch, 2))
            drawn += batch
            for u, v in cand:
                if u == v or member[u] == member[v]:
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


def write_edge_list(stream: GraphStream, path: str) -> None:
    """Write snapshots as ``src dst time`` lines, snapshot index as the time."""
    with open(path, "w", encoding="utf-8") as fh:
        for snap in stream.snapshots:
            for u, v in snap.edges:
                fh.write(f"{u} {v} {snap.index}\n")
