"""Training loop, negative sampling, edge scoring, and ranking metrics.

Training follows the usual discriminative recipe for edge streams: for every
epoch and every snapshot that has a full window behind it, score the
snapshot's real edges against freshly drawn absent pairs and take one
optimizer step on the summed log loss.  Positive windows are sampled once
and reused across epochs; negatives are redrawn every epoch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import model as nn
from .diffusion import DIST_CAP, DiffusionCache, sample_batch
from .encoding import fuse_batch, table_gradients
from .errors import ConfigError, DataError, NumericalError
from .graphstream import GraphStream, LabeledTestEdge, split_train_test

__all__ = [
    "TrainConfig",
    "TrainResult",
    "EvaluationReport",
    "sample_negatives",
    "compute_loss",
    "compute_auc",
    "roc_points",
    "train",
    "score_edges",
]

log = logging.getLogger(__name__)

LOSS_EPS = 1e-12  # probability clamp inside the log loss


@dataclass
class TrainConfig:
    """Hyperparameters for training and evaluation."""

    epochs: int = 100
    k: int = 5
    tau: int = 2
    dim: int = 32
    layers: int = 2
    heads: int = 2
    lr: float = 1e-3
    seed: int = 0
    diffusion: str = "ppr"
    alpha: float = 0.15
    beta: float = 5.0
    snapshot_size: int = 1000
    train_ratio: float = 0.5
    anomaly_pct: float = 0.10
    ablate: tuple[str, ...] = ()
    residual: bool = False
    dist_cap: int = DIST_CAP

    def __post_init__(self):
        if isinstance(self.ablate, list):
            self.ablate = tuple(self.ablate)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.k < 1:
            raise ConfigError(f"context size must be >= 1, got {self.k}")
        if self.tau < 1:
            raise ConfigError(f"window length must be >= 1, got {self.tau}")
        if self.dim < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dim}")
        if self.layers < 1:
            raise ConfigError(f"layer count must be >= 1, got {self.layers}")
        if self.heads < 1 or self.dim % self.heads != 0:
            raise ConfigError(f"head count {self.heads} must divide dimension {self.dim}")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.diffusion not in ("ppr", "heat"):
            raise ConfigError(f"diffusion must be 'ppr' or 'heat', got {self.diffusion!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.beta <= 0.0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.snapshot_size < 1:
            raise ConfigError(f"snapshot size must be >= 1, got {self.snapshot_size}")
        if not 0.0 < self.train_ratio < 1.0:
            raise ConfigError(f"train ratio must lie in (0, 1), got {self.train_ratio}")
        if not 0.0 < self.anomaly_pct < 1.0:
            raise ConfigError(f"anomaly pct must lie in (0, 1), got {self.anomaly_pct}")
        for name in self.ablate:
            if name not in ("diff", "dist", "temp"):
                raise ConfigError(f"unknown ablation {name!r}")

    @property
    def diffusion_param(self) -> float:
        return self.alpha if self.diffusion == "ppr" else self.beta

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "k": self.k, "tau": self.tau, "dim": self.dim,
            "layers": self.layers, "heads": self.heads, "lr": self.lr,
            "seed": self.seed, "diffusion": self.diffusion, "alpha": self.alpha,
            "beta": self.beta, "snapshot_size": self.snapshot_size,
            "train_ratio": self.train_ratio, "anomaly_pct": self.anomaly_pct,
            "ablate": list(self.ablate), "residual": self.residual,
            "dist_cap": self.dist_cap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class TrainResult:
    params: nn.ModelParameters
    loss_history: list  # (epoch, snapshot, loss) triples
    skipped_updates: int = 0


@dataclass
class EvaluationReport:
    """Scores and per-snapshot AUCs for a labeled test set."""

    records: list        # (snapshot, u, v, label, score) in input order
    snapshot_auc: dict   # snapshot -> AUC, only where both labels occur
    mean_auc: float

    def to_dict(self) -> dict:
        return {
            "mean_auc": self.mean_auc,
            "snapshot_auc": {str(t): auc for t, auc in sorted(self.snapshot_auc.items())},
            "edges_scored": len(self.records),
        }


def sample_negatives(count: int, forbidden: frozenset, node_count: int,
                     rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` uniform node pairs absent from ``forbidden``.

    Pairs are returned as an (count, 2) int64 array of (min, max) tuples;
    draws may repeat each other — only presence in ``forbidden`` and
    self-loops are rejected.
    """
    if node_count < 2:
        raise DataError("need at least 2 nodes to sample absent pairs")
    out = np.empty((count, 2), dtype=np.int64)
    filled = 0
    drawn = 0
    budget = 100 * max(count, 1)
    while filled < count:
        if drawn >= budget:
            raise DataError(
                f"could not find {count} absent pairs after {drawn} draws")
        batch = min(max(2 * (count - filled), 64), budget - drawn)
        cand = rng.integers(0, node_count, size=(batch, 2))
        drawn += batch
        for u, v in cand:
            if u == v:
                continue
            key = (int(min(u, v)), int(max(u, v)))
            if key in forbidden:
                continue
            out[filled] = key
            filled += 1
            if filled == count:
                break
    return out


def compute_loss(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Summed log loss: real edges pushed toward 0, absent pairs toward 1."""
    p = np.clip(np.asarray(pos_scores, dtype=np.float64), LOSS_EPS, 1.0 - LOSS_EPS)
    q = np.clip(np.asarray(neg_scores, dtype=np.float64), LOSS_EPS, 1.0 - LOSS_EPS)
    return float(-(np.log1p(-p).sum() + np.log(q).sum()))


def compute_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via midranks; ties get half credit."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError("scores and labels must be 1-d arrays of equal length")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs at least one example of each class")
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    cumulative = np.cumsum(counts)
    midrank = cumulative - counts + (counts + 1) / 2.0  # 1-based average rank
    ranks = midrank[inverse]
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """ROC curve as (threshold, fpr, tpr) rows, one per distinct score."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    tp = np.cumsum(y)
    fp = np.cumsum(1 - y)
    last = np.nonzero(np.append(s[1:] != s[:-1], True))[0]  # last index of each tie group
    rows = np.column_stack([
        s[last],
        fp[last] / max(n_neg, 1),
        tp[last] / max(n_pos, 1),
    ])
    return rows


def _usable_snapshots(snap_range: range, tau: int) -> list[int]:
    return [t for t in snap_range if t >= tau - 1]


def train(stream: GraphStream, cfg: TrainConfig,
          cache: DiffusionCache | None = None) -> TrainResult:
    """Fit the model on the training half of ``stream``.

    One optimizer step per (epoch, snapshot); aborts with NumericalError if
    the loss becomes non-finite, and skips (but counts) updates whose
    gradients are non-finite.
    """
    cfg.validate()
    train_range, _ = split_train_test(stream, cfg.train_ratio)
    usable = _usable_snapshots(train_range, cfg.tau)
    if not usable:
        raise DataError(
            f"training range {train_range} has no snapshot with a full "
            f"window of length {cfg.tau}")

    if cache is None:
        cache = DiffusionCache(stream, cfg.diffusion, cfg.diffusion_param)

    seeds = np.random.SeedSequence(cfg.seed).spawn(1 + cfg.epochs)
    init_rng = np.random.default_rng(seeds[0])
    params = nn.ModelParameters.init(cfg.dim, cfg.layers, cfg.heads, cfg.k, cfg.tau,
                                     init_rng, cfg.dist_cap, cfg.residual)
    pdict = params.param_dict()
    adam = nn.AdamState(pdict, cfg.lr)

    forbidden = frozenset(
        edge for t in train_range for edge in stream.snapshots[t].edge_set)

    positives = {
        t: sample_batch(stream, cache, stream.snapshots[t].edge_array, t,
                        cfg.k, cfg.tau, cfg.dist_cap)
        for t in usable
    }

    history = []
    skipped = 0
    for epoch in range(cfg.epochs):
        neg_rng = np.random.default_rng(seeds[1 + epoch])
        for t in usable:
            pos = positives[t]
            n_pos = len(pos)
            negs = sample_negatives(n_pos, forbidden, stream.node_count, neg_rng)
            neg = sample_batch(stream, cache, negs, t, cfg.k, cfg.tau, cfg.dist_cap)

            ranks = np.concatenate([pos.ranks, neg.ranks])
            dists = np.concatenate([pos.distances, neg.distances])
            rts = np.concatenate([pos.rel_times, neg.rel_times])
            x = fuse_batch(ranks, dists, rts, params.tables, cfg.ablate)

            trace = nn.forward(x, params)
            loss = compute_loss(trace.scores[:n_pos], trace.scores[n_pos:])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, snapshot {t}: "
                    f"score range [{trace.scores.min()}, {trace.scores.max()}]")
            history.append((epoch, t, loss))

            # d(loss)/d(logit): sigmoid + log loss cancel to (score - label),
            # with label 1 for absent pairs and 0 for real edges.
            d_logits = trace.scores.copy()
            d_logits[n_pos:] -= 1.0
            grads = nn.backward(trace, params, d_logits=d_logits)
            d_x = grads.pop("x")
            grads.update(table_gradients(ranks, dists, rts, d_x,
                                         params.tables, cfg.ablate))
            if not adam.step(pdict, grads):
                skipped += 1
                log.warning("skipped non-finite update at epoch %d snapshot %d",
                            epoch, t)
        log.debug("epoch %d done, last loss %.6f", epoch, history[-1][2])

    return TrainResult(params, history, skipped)


def score_edges(params: nn.ModelParameters, stream: GraphStream,
                edges: list[LabeledTestEdge], cfg: TrainConfig,
                cache: DiffusionCache | None = None) -> EvaluationReport:
    """Score labeled edges snapshot by snapshot and compute per-snapshot AUCs.

    Diffusion and sampling run on the stream's real edges only — injected
    pairs never contaminate the graph structure.  Snapshots where every edge
    has the same label are skipped in the AUC average.
    """
    cfg.validate()
    if not edges:
        raise DataError("no edges to score")
    if cache is None:
        cache = DiffusionCache(stream, cfg.diffusion, cfg.diffusion_param)

    by_snapshot: dict[int, list[LabeledTestEdge]] = {}
    for e in edges:
        by_snapshot.setdefault(e.snapshot, []).append(e)

    records = []
    snapshot_auc = {}
    for t in sorted(by_snapshot):
        group = by_snapshot[t]
        pairs = np.asarray([e.edge for e in group], dtype=np.int64)
        batch = sample_batch(stream, cache, pairs, t, cfg.k, cfg.tau, cfg.dist_cap)
        x = fuse_batch(batch.ranks, batch.distances, batch.rel_times,
                       params.tables, cfg.ablate)
        scores = nn.forward(x, params).scores
        labels = np.asarray([e.label for e in group])
        for e, s in zip(group, scores):
            records.append((t, e.edge[0], e.edge[1], e.label, float(s)))
        if labels.min() != labels.max():
            snapshot_auc[t] = compute_auc(scores, labels)
        else:
            log.warning("snapshot %d has a single label class; skipping its AUC", t)

    if not snapshot_auc:
        raise DataError("no snapshot had both labels; cannot compute AUC")
    mean_auc = float(np.mean(list(snapshot_auc.values())))
    return EvaluationReport(records, snapshot_auc, mean_auc)
