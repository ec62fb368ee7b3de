"""Vector and matrix primitives shared by every loss.

All functions accumulate in float64 regardless of input dtype: distance
ordering drives the topology downstream, and float32 drift can flip edge
order.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import AllMaskedError, DegenerateTargetError, DimMismatchError

DEFAULT_LN_EPS = 1e-5
DEFAULT_COSINE_EPS = 1e-12


@dataclass
class TokenMatrix:
    """Per-token hidden states with a binary keep-mask.

    values: (n, d) real matrix, one row per token.
    mask:   (n,) vector of {0, 1}; 1 marks a non-padding token.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask)
        if self.values.ndim != 2:
            raise DimMismatchError("TokenMatrix values must be 2-D (tokens x hidden)")
        if self.mask.shape != (self.values.shape[0],):
            raise DimMismatchError(
                f"mask length {self.mask.shape} does not match {self.values.shape[0]} rows"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("TokenMatrix values must be finite")
        if not np.isin(self.mask, (0, 1)).all():
            raise ValueError("TokenMatrix mask entries must be 0 or 1")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def masked_mean_pool(tokens: TokenMatrix) -> np.ndarray:
    """Mask-weighted mean of token rows: (sum_i m_i H_i) / (sum_i m_i)."""
    m = tokens.mask.astype(np.float64)
    total = m.sum()
    if total == 0:
        raise AllMaskedError("every mask entry is 0; nothing to pool")
    return (tokens.values * m[:, None]).sum(axis=0) / total


def layer_norm(v: np.ndarray, eps: float = DEFAULT_LN_EPS) -> np.ndarray:
    """Parameter-free layer norm: (v - mean) / sqrt(population_var + eps)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise DimMismatchError("layer_norm needs a 1-D vector with dim >= 2")
    centered = v - v.mean()
    return centered / np.sqrt(np.mean(centered * centered) + eps)


def cosine(u: np.ndarray, v: np.ndarray, eps: float = DEFAULT_COSINE_EPS) -> float:
    """Cosine similarity with eps-floored norms, clamped to [-1, 1].

    Zero vectors yield 0 via the floor instead of raising.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatchError(f"cosine dims differ: {u.shape} vs {v.shape}")
    nu = max(float(np.linalg.norm(u)), eps)
    nv = max(float(np.linalg.norm(v)), eps)
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))


def pairwise_distances(points) -> np.ndarray:
    """Symmetric Euclidean distance matrix over the rows of `points`."""
    try:
        pts = np.asarray(points, dtype=np.float64)
    except ValueError as exc:
        raise DimMismatchError(f"points do not share one dimension: {exc}") from exc
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise DimMismatchError("points must form a non-empty 2-D array")
    return _kernels.pairwise(pts)


def _cosine_grad(target: np.ndarray, variable: np.ndarray, eps: float) -> np.ndarray:
    """d(1 - cos(target, variable)) / d variable with both norms eps-floored."""
    nt = max(float(np.linalg.norm(target)), eps)
    nv = max(float(np.linalg.norm(variable)), eps)
    dot = float(target @ variable)
    return -(target / (nt * nv) - dot * variable / (nt * nv**3))


def cosine_loss_grad(
    target: np.ndarray, variable: np.ndarray, eps: float = DEFAULT_COSINE_EPS
):
    """Loss 1 - cos(target, variable) and its gradient w.r.t. `variable`.

    The target is a constant direction; it must have norm > eps.
    Returns (loss, grad) with grad the same shape as `variable`.
    """
    t = np.asarray(target, dtype=np.float64)
    v = np.asarray(variable, dtype=np.float64)
    if t.shape != v.shape:
        raise DimMismatchError(f"target/variable dims differ: {t.shape} vs {v.shape}")
    if float(np.linalg.norm(t)) <= eps:
        raise DegenerateTargetError("target norm is below eps")
    loss = 1.0 - cosine(t, v, eps)
    return loss, _cosine_grad(t, v, eps)


def validate_distance_matrix(D: np.ndarray, tol: float = 1e-6) -> None:
    """Assert symmetry, zero diagonal, non-negativity and triangle inequality."""
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.shape != (n, n):
        raise DimMismatchError("distance matrix must be square")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix is not symmetric")
    if np.diagonal(D).any():
        raise ValueError("distance matrix diagonal is not zero")
    if (D < 0).any():
        raise ValueError("negative distances")
    # D[i,k] <= D[i,j] + D[j,k] for every triple, within tol
    through = D[:, :, None] + D[None, :, :]
    if ((D[:, None, :] - through) > tol).any():
        raise ValueError("triangle inequality violated beyond tolerance")
