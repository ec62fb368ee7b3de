"""Hot numeric kernels with numba and pure-numpy implementations.

Every kernel is sequential with a fixed accumulation order, so output is
bit-identical across runs and thread counts.  Within one backend the
distance values seen by the spanning-forest sweep are exactly the values
returned by ``pairwise``.
"""

import numpy as np

from .backend import NUMBA_AVAILABLE, USE_NUMBA


# ---------------------------------------------------------------------------
# pure-numpy fallbacks

def pairwise_numpy(pts: np.ndarray) -> np.ndarray:
    """Full Euclidean distance matrix via broadcasting; exact zero diagonal."""
    diff = pts[:, None, :] - pts[None, :, :]
    out = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    np.fill_diagonal(out, 0.0)
    return out


def nearest_cross_numpy(pts: np.ndarray, labels: np.ndarray):
    """For each label-0 row: index of the nearest label-1 row (ties -> lowest index)."""
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    diff = pts[idx0][:, None, :] - pts[idx1][None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    best = np.argmin(d2, axis=1)
    return idx0.astype(np.int64), idx1[best].astype(np.int64)


def mst_arrays_numpy(pts: np.ndarray):
    """Death-edge arrays (i, j, weight) via lexsorted edges + array union-find.

    Edges are processed in (weight, i, j) lexicographic order; the n-1 edges
    that merge two components are returned in that same order.
    """
    n = pts.shape[0]
    if n <= 1:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0, dtype=np.float64)
    D = pairwise_numpy(pts)
    iu, ju = np.triu_indices(n, k=1)
    w = D[iu, ju]
    order = np.lexsort((ju, iu, w))
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    out_i = np.empty(n - 1, dtype=np.int64)
    out_j = np.empty(n - 1, dtype=np.int64)
    out_w = np.empty(n - 1, dtype=np.float64)
    count = 0
    for idx in order:
        ra, rb = find(iu[idx]), find(ju[idx])
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1
        out_i[count] = iu[idx]
        out_j[count] = ju[idx]
        out_w[count] = w[idx]
        count += 1
        if count == n - 1:
            break
    return out_i, out_j, out_w


# ---------------------------------------------------------------------------
# numba kernels

if NUMBA_AVAILABLE:
    from numba import njit

    @njit(cache=True)
    def pairwise_numba(pts):
        n, d = pts.shape
        out = np.zeros((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for c in range(d):
                    diff = pts[i, c] - pts[j, c]
                    acc += diff * diff
                r = np.sqrt(acc)
                out[i, j] = r
                out[j, i] = r
        return out

    @njit(cache=True)
    def nearest_cross_numba(pts, labels):
        n, d = pts.shape
        n0 = 0
        for i in range(n):
            if labels[i] == 0:
                n0 += 1
        src = np.empty(n0, dtype=np.int64)
        tgt = np.empty(n0, dtype=np.int64)
        k = 0
        for i in range(n):
            if labels[i] != 0:
                continue
            best = -1
            best_d2 = np.inf
            for j in range(n):
                if labels[j] != 1:
                    continue
                acc = 0.0
                for c in range(d):
                    diff = pts[i, c] - pts[j, c]
                    acc += diff * diff
                if acc < best_d2:
                    best_d2 = acc
                    best = j
            src[k] = i
            tgt[k] = best
            k += 1
        return src, tgt

    @njit(cache=True)
    def mst_arrays_numba(pts):
        # Enumerate i<j row-major, stable-sort by weight: equivalent to
        # (weight, i, j) lexicographic order.
        n, d = pts.shape
        m = n * (n - 1) // 2
        wts = np.empty(m, dtype=np.float64)
        ii = np.empty(m, dtype=np.int64)
        jj = np.empty(m, dtype=np.int64)
        k = 0
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for c in range(d):
                    diff = pts[i, c] - pts[j, c]
                    acc += diff * diff
                wts[k] = np.sqrt(acc)
                ii[k] = i
                jj[k] = j
                k += 1
        order = np.argsort(wts, kind="mergesort")
        parent = np.arange(n, dtype=np.int64)
        rank = np.zeros(n, dtype=np.int64)
        out_i = np.empty(n - 1, dtype=np.int64)
        out_j = np.empty(n - 1, dtype=np.int64)
        out_w = np.empty(n - 1, dtype=np.float64)
        count = 0
        for e in range(m):
            idx = order[e]
            a = ii[idx]
            b = jj[idx]
            ra = a
            while parent[ra] != ra:
                ra = parent[ra]
            x = a
            while parent[x] != ra:
                nxt = parent[x]
                parent[x] = ra
                x = nxt
            rb = b
            while parent[rb] != rb:
                rb = parent[rb]
            x = b
            while parent[x] != rb:
                nxt = parent[x]
                parent[x] = rb
                x = nxt
            if ra == rb:
                continue
            if rank[ra] < rank[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            if rank[ra] == rank[rb]:
                rank[ra] += 1
            out_i[count] = a
            out_j[count] = b
            out_w[count] = wts[idx]
            count += 1
            if count == n - 1:
                break
        return out_i, out_j, out_w


# ---------------------------------------------------------------------------
# dispatch

def pairwise(pts: np.ndarray) -> np.ndarray:
    if USE_NUMBA:
        return pairwise_numba(pts)
    return pairwise_numpy(pts)


def nearest_cross(pts: np.ndarray, labels: np.ndarray):
    lab = np.ascontiguousarray(labels, dtype=np.int64)
    if USE_NUMBA:
        return nearest_cross_numba(np.ascontiguousarray(pts), lab)
    return nearest_cross_numpy(pts, lab)


def mst_arrays(pts: np.ndarray):
    if pts.shape[0] <= 1:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0, dtype=np.float64)
    if USE_NUMBA:
        return mst_arrays_numba(np.ascontiguousarray(pts))
    return mst_arrays_numpy(pts)


def warmup() -> None:
    """Trigger JIT compilation so timed sections exclude compile cost."""
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    labels = np.array([0, 1, 1], dtype=np.int64)
    pairwise(pts)
    mst_arrays(pts)
    nearest_cross(pts, labels)
