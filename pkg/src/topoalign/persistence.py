"""0D persistent homology over labeled point clouds.

All pairwise edges are swept in ascending (weight, i, j) order through a
union-find structure; each edge that merges two components is a death edge,
and the full set is a minimum spanning forest of the complete distance
graph.  Cross-label death edges ("bridges") are oriented label 0 -> 1 and
carry explicit direction vectors.  Topology extraction never feeds back
into gradients: edges store indices, not point data.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .backend import USE_NUMBA
from .errors import DimMismatchError, LayoutError, ValidationError


@dataclass
class LabeledPointCloud:
    """N points in R^d with binary labels and unique string ids."""

    points: np.ndarray
    labels: np.ndarray
    ids: list

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        self.ids = list(self.ids)
        if self.points.ndim != 2:
            raise DimMismatchError("points must be a 2-D array")
        n = self.points.shape[0]
        if self.labels.shape != (n,):
            raise ValidationError(f"labels length {self.labels.shape} != {n} points")
        if len(self.ids) != n:
            raise ValidationError(f"ids length {len(self.ids)} != {n} points")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValidationError("labels must be 0 or 1")
        if len(set(self.ids)) != n:
            raise ValidationError("ids must be unique")
        if not np.isfinite(self.points).all():
            raise ValidationError("points must be finite")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DeathEdge:
    """Edge (i < j) whose inclusion merged two components; weight = death time."""

    i: int
    j: int
    weight: float


@dataclass
class Bridge:
    """Cross-label death edge oriented from label 0 (source) to label 1 (target)."""

    source: int
    target: int
    direction: np.ndarray
    weight: float


class UnionFind:
    """Disjoint sets with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.components = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of a and b; True if they were distinct."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.components -= 1
        return True


def _mst_python(pts: np.ndarray):
    """Fallback sweep: numpy distances + lexsort + the UnionFind class."""
    n = pts.shape[0]
    if n <= 1:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0, dtype=np.float64)
    D = _kernels.pairwise_numpy(pts)
    iu, ju = np.triu_indices(n, k=1)
    w = D[iu, ju]
    order = np.lexsort((ju, iu, w))
    uf = UnionFind(n)
    out_i = np.empty(n - 1, dtype=np.int64)
    out_j = np.empty(n - 1, dtype=np.int64)
    out_w = np.empty(n - 1, dtype=np.float64)
    count = 0
    for idx in order:
        if uf.union(int(iu[idx]), int(ju[idx])):
            out_i[count] = iu[idx]
            out_j[count] = ju[idx]
            out_w[count] = w[idx]
            count += 1
            if count == n - 1:
                break
    return out_i, out_j, out_w


def death_edge_arrays(points: np.ndarray):
    """Death edges as (i, j, weight) arrays in ascending weight order."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.shape[0] <= 1:
        z = np.empty(0, dtype=np.int64)
        return z, z.copy(), np.empty(0, dtype=np.float64)
    if USE_NUMBA:
        return _kernels.mst_arrays_numba(pts)
    return _mst_python(pts)


def death_edges(cloud: LabeledPointCloud) -> list:
    """All 0D death edges of the cloud: exactly n-1 edges, weight ascending."""
    ei, ej, ew = death_edge_arrays(cloud.points)
    return [DeathEdge(int(i), int(j), float(w)) for i, j, w in zip(ei, ej, ew)]


def extract_bridges(cloud: LabeledPointCloud, edges: list) -> list:
    """Keep cross-label death edges, oriented label 0 -> label 1.

    Direction is points[target] - points[source]; ascending-weight order is
    preserved.  Returns an empty list when no edge crosses the labels.
    """
    labels = cloud.labels
    out = []
    for e in edges:
        if labels[e.i] == labels[e.j]:
            continue
        if labels[e.i] == 0:
            s, t = e.i, e.j
        else:
            s, t = e.j, e.i
        out.append(
            Bridge(
                source=s,
                target=t,
                direction=cloud.points[t] - cloud.points[s],
                weight=e.weight,
            )
        )
    return out


def _check_pair_layout(cloud: LabeledPointCloud) -> int:
    """Validate the 2B stacked layout (rows 0..B-1 label 0, B..2B-1 label 1)."""
    n = cloud.n
    if n < 2 or n % 2 != 0:
        raise LayoutError(f"paired layout needs an even point count, got {n}")
    B = n // 2
    if cloud.labels[:B].any() or not cloud.labels[B:].all():
        raise LayoutError("rows 0..B-1 must be label 0 and rows B..2B-1 label 1")
    return B


def baseline_pairs(cloud: LabeledPointCloud, mode: str, seed=None) -> list:
    """Non-topological pairings used as ablation baselines.

    mode 'random':      each prompt paired with a uniformly drawn gold row.
    mode 'per_example': prompt i paired with gold B+i.
    mode 'knn':         prompt i paired with its nearest gold row
                        (ties broken by lowest index).
    """
    B = _check_pair_layout(cloud)
    if mode == "per_example":
        pairs = [(i, B + i) for i in range(B)]
    elif mode == "random":
        if seed is None:
            raise ValidationError("random baseline requires a seed")
        rng = np.random.default_rng(seed)
        pairs = [(i, int(g)) for i, g in enumerate(rng.integers(B, 2 * B, size=B))]
    elif mode == "knn":
        src, tgt = _kernels.nearest_cross(cloud.points, cloud.labels)
        pairs = list(zip(src.tolist(), tgt.tolist()))
    else:
        raise ValidationError(f"unknown baseline mode {mode!r}")
    out = []
    for s, t in pairs:
        direction = cloud.points[t] - cloud.points[s]
        out.append(
            Bridge(
                source=s,
                target=t,
                direction=direction,
                weight=float(np.linalg.norm(direction)),
            )
        )
    return out
