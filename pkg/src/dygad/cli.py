"""Command-line pipeline: ingest, train, evaluate, synth.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical
failure.  Every command that writes artifacts also writes a run manifest
capturing the exact configuration, input hash, and timings, so any run can
be reproduced from its manifest alone.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .diffusion import DiffusionCache
from .errors import ConfigError, DataError, NumericalError
from .graphstream import ingest_edge_list, inject_anomalies, split_train_test
from .model import load_checkpoint, save_checkpoint
from .synth import generate_sbm, write_edge_list
from .trainer import TrainConfig, roc_points, score_edges, train

log = logging.getLogger(__name__)


@dataclass
class RunManifest:
    """Everything needed to rerun a command and reproduce its outputs."""

    command: str
    version: str
    backend: str
    config: dict
    input_path: str | None = None
    input_sha256: str | None = None
    outputs: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    created_utc: str = ""

    def write(self, path: Path) -> None:
        self.created_utc = datetime.now(timezone.utc).isoformat()
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2, sort_keys=True)
            fh.write("\n")


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--snapshot-size", type=int, default=d.snapshot_size,
                   help="edges per snapshot (default %(default)s)")
    p.add_argument("--train-ratio", type=float, default=d.train_ratio,
                   help="fraction of snapshots used for training (default %(default)s)")
    p.add_argument("--anomaly-pct", type=float, default=d.anomaly_pct,
                   help="fraction of anomalous pairs mixed into each test snapshot")
    p.add_argument("--k", type=int, default=d.k, help="contextual nodes per target")
    p.add_argument("--tau", type=int, default=d.tau, help="window length in snapshots")
    p.add_argument("--dim", type=int, default=d.dim, help="embedding dimension")
    p.add_argument("--layers", type=int, default=d.layers, help="attention layers")
    p.add_argument("--heads", type=int, default=d.heads, help="attention heads")
    p.add_argument("--epochs", type=int, default=d.epochs, help="training epochs")
    p.add_argument("--lr", type=float, default=d.lr, help="learning rate")
    p.add_argument("--seed", type=int, default=d.seed, help="master random seed")
    p.add_argument("--diffusion", choices=("ppr", "heat"), default=d.diffusion,
                   help="diffusion operator (default %(default)s)")
    p.add_argument("--alpha", type=float, default=d.alpha,
                   help="restart probability for ppr diffusion")
    p.add_argument("--beta", type=float, default=d.beta,
                   help="scale for heat diffusion")
    p.add_argument("--ablate", choices=("diff", "dist", "temp"), action="append",
                   default=[], help="drop one encoding term (repeatable)")
    p.add_argument("--residual", action="store_true",
                   help="add residual connections around attention layers")


def _config_from_args(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs, k=args.k, tau=args.tau, dim=args.dim,
        layers=args.layers, heads=args.heads, lr=args.lr, seed=args.seed,
        diffusion=args.diffusion, alpha=args.alpha, beta=args.beta,
        snapshot_size=args.snapshot_size, train_ratio=args.train_ratio,
        anomaly_pct=args.anomaly_pct, ablate=tuple(args.ablate),
        residual=args.residual,
    )


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> int:
    t0 = time.perf_counter()
    stream = ingest_edge_list(args.input, args.snapshot_size)
    elapsed = time.perf_counter() - t0
    info = stream.manifest()
    print(f"snapshots={info['snapshot_count']} nodes={info['node_count']} "
          f"edges={info['edge_count']}")
    for row in info["snapshots"]:
        print(f"  snapshot {row['index']}: {row['edges']} edges, "
              f"{row['active_nodes']} active nodes")
    if args.out_dir:
        out = _out_dir(args)
        with open(out / "stream.json", "w", encoding="utf-8") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")
        manifest = RunManifest(
            command="ingest", version=__version__, backend=_kernels.BACKEND,
            config={"snapshot_size": args.snapshot_size},
            input_path=args.input, input_sha256=_sha256(args.input),
            outputs={"stream": str(out / "stream.json")},
            timings={"ingest_sec": elapsed},
        )
        manifest.write(out / "manifest.json")
    return 0


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    out = _out_dir(args)
    timings = {}

    t0 = time.perf_counter()
    stream = ingest_edge_list(args.input, cfg.snapshot_size)
    timings["ingest_sec"] = time.perf_counter() - t0

    cache = DiffusionCache(stream, cfg.diffusion, cfg.diffusion_param,
                           cache_dir=args.diffusion_cache)
    t0 = time.perf_counter()
    result = train(stream, cfg, cache)
    timings["train_sec"] = time.perf_counter() - t0

    ckpt_path = out / "checkpoint.npz"
    save_checkpoint(str(ckpt_path), result.params, cfg.to_dict())

    loss_path = out / "loss_history.csv"
    with open(loss_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "snapshot", "loss"])
        for epoch, snap, loss in result.loss_history:
            w.writerow([epoch, snap, repr(loss)])

    manifest = RunManifest(
        command="train", version=__version__, backend=_kernels.BACKEND,
        config=cfg.to_dict(),
        input_path=args.input, input_sha256=_sha256(args.input),
        outputs={"checkpoint": str(ckpt_path), "loss_history": str(loss_path)},
        timings=timings,
    )
    manifest.write(out / "manifest.json")

    final_loss = result.loss_history[-1][2]
    print(f"trained {cfg.epochs} epochs; final loss {final_loss:.6f}; "
          f"checkpoint {ckpt_path}")
    if result.skipped_updates:
        print(f"warning: skipped {result.skipped_updates} non-finite updates",
              file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    params, config, _ = load_checkpoint(args.checkpoint)
    cfg = TrainConfig.from_dict(config)
    if args.anomaly_pct is not None:
        cfg.anomaly_pct = args.anomaly_pct
    seed = cfg.seed if args.seed is None else args.seed
    cfg.validate()
    out = _out_dir(args)
    timings = {}

    t0 = time.perf_counter()
    stream = ingest_edge_list(args.input, cfg.snapshot_size)
    timings["ingest_sec"] = time.perf_counter() - t0

    _, test_range = split_train_test(stream, cfg.train_ratio)
    labeled = inject_anomalies(stream, test_range, cfg.anomaly_pct, seed)

    cache = DiffusionCache(stream, cfg.diffusion, cfg.diffusion_param,
                           cache_dir=args.diffusion_cache)
    t0 = time.perf_counter()
    report = score_edges(params, stream, labeled, cfg, cache)
    timings["score_sec"] = time.perf_counter() - t0

    scores_path = out / "scores.csv"
    with open(scores_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snapshot", "src", "dst", "label", "score"])
        for t, u, v, label, score in report.records:
            w.writerow([t, stream.node_ids[u], stream.node_ids[v], label, repr(score)])

    report_path = out / "report.json"
    payload = report.to_dict()
    payload["seed"] = seed
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    outputs = {"scores": str(scores_path), "report": str(report_path)}
    if args.roc_csv:
        roc_path = out / "roc_points.csv"
        with open(roc_path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snapshot", "threshold", "fpr", "tpr"])
            by_snap: dict[int, list] = {}
            for t, _, _, label, score in report.records:
                by_snap.setdefault(t, []).append((score, label))
            for t in sorted(by_snap):
                arr = np.asarray(by_snap[t])
                for thr, fpr, tpr in roc_points(arr[:, 0], arr[:, 1].astype(int)):
                    w.writerow([t, repr(thr), repr(fpr), repr(tpr)])
        outputs["roc_points"] = str(roc_path)

    manifest = RunManifest(
        command="evaluate", version=__version__, backend=_kernels.BACKEND,
        config={**cfg.to_dict(), "checkpoint": args.checkpoint, "eval_seed": seed},
        input_path=args.input, input_sha256=_sha256(args.input),
        outputs=outputs, timings=timings,
    )
    manifest.write(out / "manifest.json")

    print(f"mean AUC {report.mean_auc:.4f} over {len(report.snapshot_auc)} snapshots; "
          f"scores {scores_path}")
    for t, auc in sorted(report.snapshot_auc.items()):
        print(f"  snapshot {t}: AUC {auc:.4f}")
    return 0


def cmd_synth(args) -> int:
    stream, memberships = generate_sbm(
        nodes=args.nodes, blocks=args.blocks, p_intra=args.p_intra,
        p_inter=args.p_inter, snapshots=args.snapshots, drift=args.drift,
        seed=args.seed)
    write_edge_list(stream, args.out)
    if args.blocks_out:
        np.save(args.blocks_out, memberships)
    print(f"wrote {stream.edge_count} edges over {stream.snapshot_count} snapshots "
          f"({stream.node_count} nodes) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dygad",
                     description="Anomaly detection on dynamic graph streams.")
    parser.add_argument("--version", action="version", version=f"dygad {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log progress details")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse an edge list and report snapshot stats")
    p.add_argument("--input", required=True, help="edge list file (src dst time)")
    p.add_argument("--snapshot-size", type=int, default=TrainConfig().snapshot_size)
    p.add_argument("--out-dir", default=None, help="write stream.json + manifest here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a detector on the stream's first half")
    p.add_argument("--input", required=True, help="edge list file (src dst time)")
    _add_hyper_flags(p)
    p.add_argument("--out-dir", required=True, help="directory for checkpoint + logs")
    p.add_argument("--diffusion-cache", default=None,
                   help="directory for cached diffusion matrices")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score test snapshots with injected anomalies")
    p.add_argument("--input", required=True, help="edge list file (src dst time)")
    p.add_argument("--checkpoint", required=True, help="checkpoint.npz from train")
    p.add_argument("--anomaly-pct", type=float, default=None,
                   help="override the training-time anomaly percentage")
    p.add_argument("--seed", type=int, default=None,
                   help="override the injection seed (default: checkpoint seed)")
    p.add_argument("--out-dir", required=True, help="directory for scores + report")
    p.add_argument("--diffusion-cache", default=None,
                   help="directory for cached diffusion matrices")
    p.add_argument("--roc-csv", action="store_true",
                   help="also write per-snapshot ROC points")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate a block-model stream for smoke tests")
    p.add_argument("--out", required=True, help="output edge list path")
    p.add_argument("--nodes", type=int, default=100)
    p.add_argument("--blocks", type=int, default=2)
    p.add_argument("--p-intra", type=float, default=0.1)
    p.add_argument("--p-inter", type=float, default=0.005)
    p.add_argument("--snapshots", type=int, default=10)
    p.add_argument("--drift", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks-out", default=None,
                   help="also save per-snapshot block memberships (.npy)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
