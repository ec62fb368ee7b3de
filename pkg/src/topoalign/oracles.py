"""Independent brute-force references used for self-checking.

Nothing here shares code with the production extraction path: distances
come from plain scalar loops and the spanning forest is grown by component
relabelling, not union-find.  The ``oracle-check`` CLI subcommand and the
test suite diff the fast implementations against these.
"""

import math


def scalar_pairwise(points) -> list:
    """Distance matrix as nested lists, computed with scalar loops."""
    pts = [[float(x) for x in row] for row in points]
    n = len(pts)
    D = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for a, b in zip(pts[i], pts[j]):
                diff = a - b
                acc += diff * diff
            D[i][j] = D[j][i] = math.sqrt(acc)
    return D


def kruskal_mst_edges(points) -> list:
    """Minimum-spanning-tree edges [(i, j, weight), ...] by brute force.

    All pairs are sorted by (weight, i, j); connectivity is tracked with a
    component-label array merged by full relabel scans.
    """
    pts = [[float(x) for x in row] for row in points]
    n = len(pts)
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for a, b in zip(pts[i], pts[j]):
                diff = a - b
                acc += diff * diff
            edges.append((math.sqrt(acc), i, j))
    edges.sort()
    comp = list(range(n))
    out = []
    for w, i, j in edges:
        ci, cj = comp[i], comp[j]
        if ci == cj:
            continue
        out.append((i, j, w))
        for k in range(n):
            if comp[k] == cj:
                comp[k] = ci
        if len(out) == n - 1:
            break
    return out
