#!/usr/bin/env python3
"""Compare the compiled sampling kernels against the pure-NumPy fallback.

Two views:

* micro -- call ``sample_window`` / ``bfs_distances`` from both backend
  modules directly on identical inputs and report medians.
* end-to-end -- run ``dygad train`` in subprocesses with the backend forced
  via ``DYGAD_PURE_PYTHON`` and compare the recorded training time.

Usage::

    python3 benchmarks/bench_kernels.py            # both views
    python3 benchmarks/bench_kernels.py --micro-only
"""

import argparse
import importlib
import json
import os
import statistics
import subprocess
import sys
import tempfile
import time

import numpy as np

from dygad._kernels import _pure
from dygad.diffusion import DiffusionCache
from dygad.synth import generate_sbm


def load_backends():
    backends = {"pure": _pure}
    try:
        backends["compiled"] = importlib.import_module("dygad._kernels._core")
    except ImportError:
        print("note: compiled backend not built; benchmarking pure only")
    return backends


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_micro(nodes, n_pairs, k, repeats):
    stream, _ = generate_sbm(nodes=nodes, blocks=2, p_intra=0.05,
                             p_inter=0.005, snapshots=1, seed=0)
    snap = stream.snapshots[0]
    diff = DiffusionCache(stream, "ppr", 0.15).get(0)
    indptr, indices = snap.csr()
    rng = np.random.default_rng(1)
    pairs = np.stack([
        rng.integers(0, nodes - 1, size=n_pairs),
        rng.integers(1, nodes, size=n_pairs),
    ], axis=1).astype(np.int64)
    pairs[:, 1] = np.where(pairs[:, 0] == pairs[:, 1], pairs[:, 1] - 1, pairs[:, 1])
    pairs = np.sort(pairs, axis=1)
    sources = np.ascontiguousarray(pairs[:64, 0])

    print(f"\nmicro: {nodes} nodes, {len(snap)} edges, {n_pairs} target pairs, "
          f"k={k}, {repeats} repeats")
    rows = {}
    for name, mod in load_backends().items():
        t_win = median_time(
            lambda m=mod: m.sample_window(diff.block, diff.active, diff._pos,
                                          indptr, indices, pairs, k, 16),
            repeats)
        t_bfs = median_time(
            lambda m=mod: [m.bfs_distances(indptr, indices, sources[i:i + 1],
                                           16, nodes) for i in range(64)],
            repeats)
        rows[name] = (t_win, t_bfs)
        print(f"  {name:>8}: sample_window {t_win * 1e3:8.2f} ms   "
              f"bfs x64 {t_bfs * 1e3:8.2f} ms")
    if len(rows) == 2:
        print(f"  speedup : sample_window {rows['pure'][0] / rows['compiled'][0]:.1f}x"
              f"   bfs {rows['pure'][1] / rows['compiled'][1]:.1f}x")


def bench_end_to_end(epochs):
    with tempfile.TemporaryDirectory() as tmp:
        data = os.path.join(tmp, "edges.txt")
        base = [sys.executable, "-m", "dygad"]
        subprocess.run(base + ["synth", "--out", data, "--nodes", "100",
                               "--snapshots", "10", "--seed", "0"],
                       check=True, capture_output=True)
        print(f"\nend-to-end: dygad train, {epochs} epochs, 100-node stream")
        results = {}
        for name, env_val in (("compiled", "0"), ("pure", "1")):
            out = os.path.join(tmp, name)
            env = dict(os.environ, DYGAD_PURE_PYTHON=env_val)
            proc = subprocess.run(
                base + ["train", "--input", data, "--out-dir", out,
                        "--epochs", str(epochs), "--snapshot-size", "260",
                        "--seed", "0"],
                env=env, capture_output=True, text=True)
            if proc.returncode != 0:
                print(f"  {name:>8}: train failed\n{proc.stderr}")
                continue
            with open(os.path.join(out, "manifest.json")) as fh:
                manifest = json.load(fh)
            if manifest["backend"] != name:
                print(f"  {name:>8}: backend unavailable "
                      f"(ran as {manifest['backend']}); skipping")
                continue
            results[name] = manifest["timings"]["train_sec"]
            print(f"  {name:>8}: {results[name]:7.2f} s "
                  f"({results[name] / epochs * 1e3:.0f} ms/epoch)")
        if len(results) == 2:
            print(f"  speedup : {results['pure'] / results['compiled']:.1f}x")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--nodes", type=int, default=600)
    ap.add_argument("--pairs", type=int, default=400)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--repeats", type=int, default=9)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--micro-only", action="store_true")
    args = ap.parse_args()
    bench_micro(args.nodes, args.pairs, args.k, args.repeats)
    if not args.micro_only:
        bench_end_to_end(args.epochs)


if __name__ == "__main__":
    main()
