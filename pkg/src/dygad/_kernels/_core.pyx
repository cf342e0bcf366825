# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled selection and BFS kernels for substructure sampling.

Mirrors ``_pure`` exactly; the per-edge work (connectivity scan, top-k
selection, multi-source BFS) runs as C loops.
"""

import numpy as np

from libc.stdint cimport int64_t

NAME = "compiled"


def bfs_distances(int64_t[::1] indptr, int64_t[::1] indices, sources, int cap, Py_ssize_t n):
    """Min BFS depth from any source, capped at ``cap``; unreached -> cap + 1."""
    depth_arr = np.full(n, cap + 1, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] depth = depth_arr
    cdef int64_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0
    cdef int64_t u, w, du
    cdef Py_ssize_t i
    for s in sources:
        u = s
        if depth[u] > 0:
            depth[u] = 0
            queue[tail] = u
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        du = depth[u]
        if du >= cap:
            continue
        for i in range(indptr[u], indptr[u + 1]):
            w = indices[i]
            if depth[w] > du + 1:
                depth[w] = du + 1
                queue[tail] = w
                tail += 1
    return depth_arr


cdef void _bfs_marked(int64_t[::1] indptr, int64_t[::1] indices, int64_t src,
                      int cap, int64_t[::1] mark, int64_t[::1] depth,
                      int64_t[::1] queue, int64_t token,
                      int64_t[::1] wanted, int64_t wtoken,
                      Py_ssize_t n_wanted) noexcept:
    """Capped BFS using token marks (no per-call clearing); exits early once
    every wanted node has been assigned a depth."""
    cdef Py_ssize_t head = 0, tail = 1
    cdef Py_ssize_t i, found = 0
    cdef int64_t u, w, du
    mark[src] = token
    depth[src] = 0
    queue[0] = src
    if wanted[src] == wtoken:
        found += 1
    while head < tail and found < n_wanted:
        u = queue[head]
        head += 1
        du = depth[u]
        if du >= cap:
            continue
        for i in range(indptr[u], indptr[u + 1]):
            w = indices[i]
            if mark[w] != token:
                mark[w] = token
                depth[w] = du + 1
                queue[tail] = w
                tail += 1
                if wanted[w] == wtoken:
                    found += 1


def sample_window(double[:, ::1] block, int64_t[::1] active, int64_t[::1] pos,
                  int64_t[::1] indptr, int64_t[::1] indices,
                  int64_t[:, ::1] pairs, int k, int dist_cap):
    """Select contexts, ranks, and hop distances for target pairs in one snapshot.

    Same contract as the pure fallback: returns ``(ctx, rank, dist)`` with
    shapes ``(B, k)``, ``(B, k + 2)``, ``(B, k + 2)``; the second target row
    carries the capped depth between the two targets.
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef Py_ssize_t na = active.shape[0]
    cdef Py_ssize_t nb = pairs.shape[0]
    cdef Py_ssize_t k2 = k + 2

    ctx_arr = np.empty((nb, k), dtype=np.int64)
    rank_arr = np.empty((nb, k2), dtype=np.int64)
    dist_arr = np.empty((nb, k2), dtype=np.int64)
    cdef int64_t[:, ::1] ctx = ctx_arr
    cdef int64_t[:, ::1] rank = rank_arr
    cdef int64_t[:, ::1] dist = dist_arr

    # Scratch reused across target pairs.
    s_arr = np.zeros(na, dtype=np.float64)
    top_s_arr = np.empty(k, dtype=np.float64)
    top_id_arr = np.empty(k, dtype=np.int64)
    sel_arr = np.empty(k2, dtype=np.int64)
    sel_s_arr = np.empty(k2, dtype=np.float64)
    order_arr = np.empty(k2, dtype=np.int64)
    da_arr = np.empty(k2, dtype=np.int64)
    db_arr = np.empty(k2, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int64)
    mark_arr = np.zeros(n, dtype=np.int64)
    depth_arr = np.zeros(n, dtype=np.int64)
    wanted_arr = np.zeros(n, dtype=np.int64)
    cdef double[::1] s = s_arr
    cdef double[::1] top_s = top_s_arr
    cdef int64_t[::1] top_id = top_id_arr
    cdef int64_t[::1] sel = sel_arr
    cdef double[::1] sel_s = sel_s_arr
    cdef int64_t[::1] order = order_arr
    cdef int64_t[::1] da = da_arr
    cdef int64_t[::1] db = db_arr
    cdef int64_t[::1] queue = queue_arr
    cdef int64_t[::1] mark = mark_arr
    cdef int64_t[::1] depth = depth_arr
    cdef int64_t[::1] wanted = wanted_arr

    cdef int64_t token = 0, wtoken = 0
    cdef int64_t v1, v2, a1, a2, u
    cdef Py_ssize_t b, j, tk, c, ia, p, q
    cdef int64_t u_walk
    cdef double key_s, su
    cdef int64_t key_id

    for b in range(nb):
        v1 = pairs[b, 0]
        v2 = pairs[b, 1]
        a1 = pos[v1]
        a2 = pos[v2]

        # Connectivity of every active node to the target pair.
        if a1 >= 0 and a2 >= 0:
            for j in range(na):
                s[j] = block[a1, j] + block[a2, j]
        elif a1 >= 0:
            for j in range(na):
                s[j] = block[a1, j]
        elif a2 >= 0:
            for j in range(na):
                s[j] = block[a2, j]
        else:
            for j in range(na):
                s[j] = 0.0

        # Top-k active candidates by (connectivity desc, id asc), targets excluded.
        tk = 0
        for j in range(na):
            u = active[j]
            if u == v1 or u == v2:
                continue
            su = s[j]
            if tk == k:
                if su < top_s[k - 1] or (su == top_s[k - 1] and u > top_id[k - 1]):
                    continue
            p = tk if tk < k else k - 1
            while p > 0 and (top_s[p - 1] < su or (top_s[p - 1] == su and top_id[p - 1] > u)):
                top_s[p] = top_s[p - 1]
                top_id[p] = top_id[p - 1]
                p -= 1
            top_s[p] = su
            top_id[p] = u
            if tk < k:
                tk += 1

        # Merge with inactive nodes (connectivity 0, ascending id) to fill k slots.
        sel[0] = v1
        sel[1] = v2
        sel_s[0] = 1.0 if a1 < 0 else block[a1, a1] + (block[a2, a1] if a2 >= 0 else 0.0)
        sel_s[1] = 1.0 if a2 < 0 else block[a2, a2] + (block[a1, a2] if a1 >= 0 else 0.0)
        ia = 0
        u_walk = 0
        c = 0
        while c < k:
            while u_walk < n and (pos[u_walk] >= 0 or u_walk == v1 or u_walk == v2):
                u_walk += 1
            if ia < tk and (top_s[ia] > 0.0 or u_walk >= n or top_id[ia] < u_walk):
                ctx[b, c] = top_id[ia]
                sel_s[2 + c] = top_s[ia]
                ia += 1
            else:
                ctx[b, c] = u_walk
                sel_s[2 + c] = 0.0
                u_walk += 1
            sel[2 + c] = ctx[b, c]
            c += 1

        # Rank of each selected node in the connectivity sort of the k+2 nodes.
        for p in range(k2):
            key_s = sel_s[p]
            key_id = sel[p]
            q = p
            while q > 0:
                u = order[q - 1]
                if sel_s[u] < key_s or (sel_s[u] == key_s and sel[u] > key_id):
                    order[q] = u
                    q -= 1
                else:
                    break
            order[q] = p
        for p in range(k2):
            rank[b, order[p]] = p

        # One capped BFS per target; contexts use the min depth, the second
        # target row records the depth separating the two targets.
        wtoken += 1
        for p in range(k2):
            wanted[sel[p]] = wtoken

        token += 1
        _bfs_marked(indptr, indices, v1, dist_cap, mark, depth, queue, token,
                    wanted, wtoken, k2)
        for p in range(k2):
            u = sel[p]
            da[p] = depth[u] if mark[u] == token else dist_cap + 1

        token += 1
        _bfs_marked(indptr, indices, v2, dist_cap, mark, depth, queue, token,
                    wanted, wtoken, k2)
        for p in range(k2):
            u = sel[p]
            db[p] = depth[u] if mark[u] == token else dist_cap + 1

        dist[b, 0] = 0
        dist[b, 1] = da[1]
        for p in range(2, k2):
            dist[b, p] = da[p] if da[p] < db[p] else db[p]

    return ctx_arr, rank_arr, dist_arr
