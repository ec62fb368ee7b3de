"""Trajectory and preference alignment losses with analytic gradients.

Bridge directions (v_topo / v_imp) are constant targets: gradients flow
only into the model-side vectors and the projection matrix.  Gradients are
returned as explicit arrays; stepping an optimizer is the host's job.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, ValidationError
from .geometry import (
    DEFAULT_COSINE_EPS,
    DEFAULT_LN_EPS,
    _cosine_grad,
    cosine,
    layer_norm,
)
from .persistence import LabeledPointCloud, death_edges, extract_bridges


def _as_matrix(name: str, values, B=None, d=None) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimMismatchError(f"{name} must be 2-D (batch x dim)")
    if B is not None and arr.shape[0] != B:
        raise DimMismatchError(f"{name} has {arr.shape[0]} rows, expected {B}")
    if d is not None and arr.shape[1] != d:
        raise DimMismatchError(f"{name} has dim {arr.shape[1]}, expected {d}")
    return arr


@dataclass
class TrajectoryBatch:
    """Pooled prompt / model-answer / gold-answer vectors for one batch."""

    h_prompt: np.ndarray
    h_model: np.ndarray
    h_gold: np.ndarray
    ids: list

    def __post_init__(self):
        self.h_prompt = _as_matrix("h_prompt", self.h_prompt)
        B, d = self.h_prompt.shape
        self.h_model = _as_matrix("h_model", self.h_model, B, d)
        self.h_gold = _as_matrix("h_gold", self.h_gold, B, d)
        self.ids = list(self.ids)
        if len(self.ids) != B:
            raise ValidationError(f"ids length {len(self.ids)} != batch size {B}")

    @property
    def size(self) -> int:
        return self.h_prompt.shape[0]

    @property
    def d(self) -> int:
        return self.h_prompt.shape[1]


@dataclass
class PreferenceBatch:
    """Pooled chosen / rejected vectors plus topic assignments."""

    h_chosen: np.ndarray
    h_rejected: np.ndarray
    topic_ids: list
    ids: list

    def __post_init__(self):
        self.h_chosen = _as_matrix("h_chosen", self.h_chosen)
        B, d = self.h_chosen.shape
        self.h_rejected = _as_matrix("h_rejected", self.h_rejected, B, d)
        self.topic_ids = [int(t) for t in self.topic_ids]
        self.ids = list(self.ids)
        if len(self.topic_ids) != B:
            raise ValidationError(f"topic_ids length {len(self.topic_ids)} != {B}")
        if len(self.ids) != B:
            raise ValidationError(f"ids length {len(self.ids)} != batch size {B}")

    @property
    def size(self) -> int:
        return self.h_chosen.shape[0]

    @property
    def d(self) -> int:
        return self.h_chosen.shape[1]


@dataclass
class Projection:
    """Trainable map from sentence-embedding space (d_s) into hidden space (d)."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimMismatchError("projection must be a (d, d_s) matrix")
        if not np.isfinite(self.values).all():
            raise ValidationError("projection entries must be finite")

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def d_s(self) -> int:
        return self.values.shape[1]


def init_projection(d: int, d_s: int, seed: int) -> Projection:
    """Seeded uniform init in +-sqrt(6/(d+d_s)), keeping |P u| comparable to |u|."""
    rng = np.random.default_rng(seed)
    limit = np.sqrt(6.0 / (d + d_s))
    return Projection(values=rng.uniform(-limit, limit, size=(d, d_s)), seed=seed)


@dataclass
class LossResult:
    """Loss scalar, per-item cosine diagnostics, optional gradients."""

    value: float
    per_item: list
    grads: dict | None = None
    bridge_count: int | None = None


def trajectory_cloud(batch: TrajectoryBatch) -> LabeledPointCloud:
    """Mixed cloud: prompt rows 0..B-1 (label 0), gold rows B..2B-1 (label 1)."""
    pts = np.vstack([batch.h_prompt, batch.h_gold])
    labels = np.concatenate(
        [np.zeros(batch.size, dtype=np.uint8), np.ones(batch.size, dtype=np.uint8)]
    )
    ids = [f"{i}:prompt" for i in batch.ids] + [f"{i}:gold" for i in batch.ids]
    return LabeledPointCloud(points=pts, labels=labels, ids=ids)


def preference_cloud(
    batch: PreferenceBatch, apply_layer_norm: bool = False, ln_eps: float = DEFAULT_LN_EPS
) -> LabeledPointCloud:
    """Mixed cloud: rejected rows 0..B-1 (label 0), chosen rows B..2B-1 (label 1)."""
    rej, cho = batch.h_rejected, batch.h_chosen
    if apply_layer_norm:
        rej = np.array([layer_norm(r, ln_eps) for r in rej])
        cho = np.array([layer_norm(c, ln_eps) for c in cho])
    pts = np.vstack([rej, cho])
    labels = np.concatenate(
        [np.zeros(batch.size, dtype=np.uint8), np.ones(batch.size, dtype=np.uint8)]
    )
    ids = [f"{i}:rejected" for i in batch.ids] + [f"{i}:chosen" for i in batch.ids]
    return LabeledPointCloud(points=pts, labels=labels, ids=ids)


def ttl_loss(
    batch: TrajectoryBatch,
    bridges: list,
    want_grads: bool = False,
    eps: float = DEFAULT_COSINE_EPS,
) -> LossResult:
    """Trajectory topology loss: mean of 1 - cos(v_topo, v_model) over bridges.

    Bridge directions are constant; gradients (when requested) cover
    d/dh_model and d/dh_prompt = -d/dh_model for every bridged prompt and
    are zero elsewhere.  An empty bridge set gives loss 0.
    """
    B, d = batch.size, batch.d
    g_model = np.zeros((B, d)) if want_grads else None
    if not bridges:
        grads = {"h_model": g_model, "h_prompt": -g_model} if want_grads else None
        return LossResult(value=0.0, per_item=[], grads=grads, bridge_count=0)
    total = 0.0
    per_item = []
    for br in bridges:
        p = br.source
        if not 0 <= p < B:
            raise IndexError(f"bridge source {p} is not a prompt row (B={B})")
        v_model = batch.h_model[p] - batch.h_prompt[p]
        c = cosine(br.direction, v_model, eps)
        total += 1.0 - c
        per_item.append((batch.ids[p], c))
        if want_grads:
            g_model[p] += _cosine_grad(br.direction, v_model, eps)
    count = len(bridges)
    value = total / count
    grads = None
    if want_grads:
        g_model /= count
        grads = {"h_model": g_model, "h_prompt": -g_model}
    return LossResult(value=value, per_item=per_item, grads=grads, bridge_count=count)


def combine_sft(ce: float, topo: float, lambda_topo: float = 0.2) -> float:
    """Total SFT objective: ce + lambda_topo * topo."""
    if lambda_topo < 0:
        raise ValidationError("lambda_topo must be >= 0")
    return ce + lambda_topo * topo


def _resolve_projected(library, proj: Projection, topic_id: int):
    u = library.topic_vector(topic_id)
    if u.shape[0] != proj.d_s:
        raise DimMismatchError(
            f"projection expects d_s={proj.d_s}, topic vector has {u.shape[0]}"
        )
    return u, proj.values @ u


def tpo_loss(
    batch: PreferenceBatch,
    library,
    proj: Projection,
    ln_eps: float = DEFAULT_LN_EPS,
    want_grads: bool = False,
    eps: float = DEFAULT_COSINE_EPS,
    use_layer_norm: bool = True,
) -> LossResult:
    """Topic-preference loss: mean of 1 - cos(delta_h, P u_t) over the batch.

    delta_h_i = LN(h_chosen_i) - LN(h_rejected_i) (LN optional via
    use_layer_norm).  Gradients cover d/ddelta_h (per item) and d/dP
    (accumulated over the batch through u_bar = P u_t).
    """
    B, d = batch.size, batch.d
    if proj.d != d:
        raise DimMismatchError(f"projection rows {proj.d} != hidden dim {d}")
    g_dh = np.zeros((B, d)) if want_grads else None
    g_P = np.zeros_like(proj.values) if want_grads else None
    total = 0.0
    per_item = []
    for i in range(B):
        if use_layer_norm:
            dh = layer_norm(batch.h_chosen[i], ln_eps) - layer_norm(
                batch.h_rejected[i], ln_eps
            )
        else:
            dh = batch.h_chosen[i] - batch.h_rejected[i]
        u, u_bar = _resolve_projected(library, proj, batch.topic_ids[i])
        c = cosine(dh, u_bar, eps)
        total += 1.0 - c
        per_item.append((batch.ids[i], c))
        if want_grads:
            g_dh[i] = _cosine_grad(u_bar, dh, eps) / B
            g_P += np.outer(_cosine_grad(dh, u_bar, eps) / B, u)
    grads = {"delta_h": g_dh, "P": g_P} if want_grads else None
    return LossResult(value=total / B, per_item=per_item, grads=grads)


def topo_tpo_loss(
    batch: PreferenceBatch,
    library,
    proj: Projection,
    want_grads: bool = False,
    eps: float = DEFAULT_COSINE_EPS,
    layer_norm_cloud: bool = False,
    ln_eps: float = DEFAULT_LN_EPS,
) -> LossResult:
    """Fully topological preference loss over rejected/chosen bridges.

    Builds the rejected+chosen cloud, extracts persistent-homology bridges,
    and averages 1 - cos(v_imp, P u_t) where v_imp is the (constant) bridge
    direction and t the topic of the bridge's rejected-row example.  The
    cloud uses raw pooled embeddings unless layer_norm_cloud is set.
    """
    B = batch.size
    if B < 1:
        raise ValidationError("batch must contain at least one pair")
    if proj.d != batch.d:
        raise DimMismatchError(f"projection rows {proj.d} != hidden dim {batch.d}")
    cloud = preference_cloud(batch, apply_layer_norm=layer_norm_cloud, ln_eps=ln_eps)
    bridges = extract_bridges(cloud, death_edges(cloud))
    g_P = np.zeros_like(proj.values) if want_grads else None
    if not bridges:
        grads = {"P": g_P} if want_grads else None
        return LossResult(value=0.0, per_item=[], grads=grads, bridge_count=0)
    total = 0.0
    per_item = []
    for br in bridges:
        i = br.source  # rejected rows are stacked first, so row index = example index
        u, u_bar = _resolve_projected(library, proj, batch.topic_ids[i])
        c = cosine(br.direction, u_bar, eps)
        total += 1.0 - c
        per_item.append((batch.ids[i], c))
        if want_grads:
            g_P += np.outer(_cosine_grad(br.direction, u_bar, eps), u)
    count = len(bridges)
    grads = {"P": g_P / count} if want_grads else None
    return LossResult(
        value=total / count, per_item=per_item, grads=grads, bridge_count=count
    )


def combine_dpo(dpo: float, tpo: float, lambda_dyn: float) -> float:
    """Total preference objective: dpo + lambda_dyn * tpo."""
    if lambda_dyn < 0:
        raise ValidationError("lambda_dyn must be >= 0")
    return dpo + lambda_dyn * tpo
