"""Learnable index-keyed encodings fused into per-node input vectors.

Each sampled node carries three small integers — its connectivity rank within
the window snapshot, its capped hop distance from the target pair, and its
relative time offset — and each indexes a learnable table.  A node's input
vector is the sum of its three table rows; a window's rows stack into the
matrix the attention encoder consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import DIST_CAP, SubstructureSample
from .errors import ConfigError, DataError

__all__ = [
    "ABLATABLE",
    "EncodingTables",
    "EncodingMatrix",
    "fuse_and_stack",
    "fuse_batch",
    "table_gradients",
]

ABLATABLE = ("diff", "dist", "temp")


class EncodingTables:
    """The three lookup tables: diffusion rank, hop distance, relative time."""

    def __init__(self, k: int, tau: int, d_enc: int, rng: np.random.Generator,
                 dist_cap: int = DIST_CAP):
        if d_enc < 1:
            raise ConfigError(f"encoding dimension must be >= 1, got {d_enc}")
        bound = 1.0 / np.sqrt(d_enc)
        self.k = k
        self.tau = tau
        self.dist_cap = dist_cap
        self.diff = rng.uniform(-bound, bound, size=(k + 2, d_enc))
        self.dist = rng.uniform(-bound, bound, size=(dist_cap + 2, d_enc))
        self.temp = rng.uniform(-bound, bound, size=(tau, d_enc))

    @property
    def d_enc(self) -> int:
        return self.diff.shape[1]

    def encode_diffusion(self, rank: int) -> np.ndarray:
        """Vector for a connectivity rank in [0, k + 2)."""
        if not 0 <= rank < self.diff.shape[0]:
            raise DataError(f"rank {rank} outside [0, {self.diff.shape[0]})")
        return self.diff[rank]

    def encode_distance(self, hops: int) -> np.ndarray:
        """Vector for a capped hop distance in [0, dist_cap + 1]."""
        if not 0 <= hops < self.dist.shape[0]:
            raise DataError(f"distance bucket {hops} outside [0, {self.dist.shape[0]})")
        return self.dist[hops]

    def encode_temporal(self, t: int, i: int) -> np.ndarray:
        """Vector for the offset of window snapshot ``i`` from anchor ``t``."""
        offset = t - i
        if not 0 <= offset < self.temp.shape[0]:
            raise DataError(f"relative time {offset} outside [0, {self.temp.shape[0]})")
        return self.temp[offset]


@dataclass(frozen=True)
class EncodingMatrix:
    """Stacked input rows for one window, with the indices that produced them."""

    rows: np.ndarray
    ranks: np.ndarray
    distances: np.ndarray
    rel_times: np.ndarray


def _check_ablate(ablate: tuple[str, ...]) -> None:
    for name in ablate:
        if name not in ABLATABLE:
            raise ConfigError(f"unknown ablation {name!r}, expected one of {ABLATABLE}")


def fuse_batch(
    ranks: np.ndarray,
    distances: np.ndarray,
    rel_times: np.ndarray,
    tables: EncodingTables,
    ablate: tuple[str, ...] = (),
) -> np.ndarray:
    """Sum the table rows selected by each index triple; ablated terms contribute zero."""
    _check_ablate(ablate)
    x = np.zeros((*ranks.shape, tables.d_enc))
    if "diff" not in ablate:
        x += tables.diff[ranks]
    if "dist" not in ablate:
        x += tables.dist[distances]
    if "temp" not in ablate:
        x += tables.temp[rel_times]
    return x


def fuse_and_stack(
    sample: SubstructureSample,
    tables: EncodingTables,
    ablate: tuple[str, ...] = (),
) -> EncodingMatrix:
    """Encode one sampled window into its (tau * (k + 2), d_enc) input matrix."""
    rows = fuse_batch(sample.ranks, sample.distances, sample.rel_times, tables, ablate)
    return EncodingMatrix(rows, sample.ranks, sample.distances, sample.rel_times)


def table_gradients(
    ranks: np.ndarray,
    distances: np.ndarray,
    rel_times: np.ndarray,
    d_rows: np.ndarray,
    tables: EncodingTables,
    ablate: tuple[str, ...] = (),
) -> dict[str, np.ndarray]:
    """Scatter input-row gradients back onto the three tables.

    Ablated tables did not contribute to the forward pass, so their gradient
    is zero.
    """
    _check_ablate(ablate)
    grads = {
        "tables.diff": np.zeros_like(tables.diff),
        "tables.dist": np.zeros_like(tables.dist),
        "tables.temp": np.zeros_like(tables.temp),
    }
    flat = d_rows.reshape(-1, d_rows.shape[-1])
    if "diff" not in ablate:
        np.add.at(grads["tables.diff"], ranks.reshape(-1), flat)
    if "dist" not in ablate:
        np.add.at(grads["tables.dist"], distances.reshape(-1), flat)
    if "temp" not in ablate:
        np.add.at(grads["tables.temp"], rel_times.reshape(-1), flat)
    return grads
