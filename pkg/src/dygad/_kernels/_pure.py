"""Pure-NumPy reference implementation of the sampling kernels.

Semantically identical to the compiled extension; selected automatically when
the extension is unavailable (or forced via ``DYGAD_PURE_PYTHON=1``).
"""

from __future__ import annotations

from collections import deque

import numpy as np

NAME = "pure"


def bfs_distances(indptr, indices, sources, cap, n):
    """Min BFS depth from any source, capped at ``cap``; unreached -> cap + 1."""
    depth = np.full(n, cap + 1, dtype=np.int64)
    queue = deque()
    for s in sources:
        if depth[s] > 0:
            depth[s] = 0
            queue.append(s)
    while queue:
        u = queue.popleft()
        du = depth[u]
        if du >= cap:
            continue
        for w in indices[indptr[u] : indptr[u + 1]]:
            if depth[w] > du + 1:
                depth[w] = du + 1
                queue.append(w)
    return depth


def sample_window(block, active, pos, indptr, indices, pairs, k, dist_cap):
    """Select contexts, ranks, and hop distances for target pairs in one snapshot.

    Parameters
    ----------
    block : (na, na) float64
        Diffusion sub-matrix over the snapshot's active nodes.
    active : (na,) int64
        Sorted active node ids (rows/columns of ``block``).
    pos : (n,) int64
        Universe id -> row in ``block``, or -1 for inactive nodes.
    indptr, indices : int64
        CSR adjacency of the snapshot over the full universe.
    pairs : (B, 2) int64
        Target edges; endpoints must be distinct, in-range ids.
    k : int
        Number of contextual nodes per target.
    dist_cap : int
        Distance cap; unreachable nodes land in bucket ``dist_cap + 1``.

    Returns
    -------
    ctx : (B, k) int64
        Context ids, descending connectivity, ties broken by ascending id.
    rank : (B, k + 2) int64
        Position of [v1, v2, ctx...] in the connectivity sort of those nodes.
    dist : (B, k + 2) int64
        Hop-distance buckets: contexts get their capped min BFS depth to
        either target; the first target anchors at 0; the second target gets
        the capped depth between the two targets, which is what tells a real
        edge's window apart from an absent pair's.
    """
    n = pos.shape[0]
    nb = pairs.shape[0]
    ctx = np.empty((nb, k), dtype=np.int64)
    rank = np.empty((nb, k + 2), dtype=np.int64)
    dist = np.empty((nb, k + 2), dtype=np.int64)

    ids = np.arange(n)
    for b in range(nb):
        v1, v2 = int(pairs[b, 0]), int(pairs[b, 1])
        a1, a2 = int(pos[v1]), int(pos[v2])

        # Connectivity over the universe: sum of the two target rows, where an
        # inactive target's row is the indicator of the node itself.
        s = np.zeros(n)
        if a1 >= 0:
            s[active] += block[a1]
        else:
            s[v1] += 1.0
        if a2 >= 0:
            s[active] += block[a2]
        else:
            s[v2] += 1.0

        order = np.lexsort((ids, -s))
        row_ctx = []
        for u in order:
            if u == v1 or u == v2:
                continue
            row_ctx.append(u)
            if len(row_ctx) == k:
                break
        ctx[b] = row_ctx

        sel = np.array([v1, v2] + row_ctx, dtype=np.int64)
        sel_order = np.lexsort((sel, -s[sel]))
        rank[b, sel_order] = np.arange(k + 2)

        d1 = bfs_distances(indptr, indices, (v1,), dist_cap, n)
        d2 = bfs_distances(indptr, indices, (v2,), dist_cap, n)
        dist[b] = np.minimum(d1, d2)[sel]
        dist[b, 0] = 0
        dist[b, 1] = d1[v2]

    return ctx, rank, dist
