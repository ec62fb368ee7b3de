"""Thin dense-array bindings over the topoalign losses.

Batches are plain contiguous float arrays (f32 or f64, cast to f64
internally); losses and gradients come back as scalars and arrays ready to
be injected into a host autograd graph as custom-function backward values.
Fixture interop uses the topoalign jsonl formats; no bespoke wire protocol.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from topoalign import (
    PreferenceBatch,
    Projection,
    Topic,
    TopicLibrary,
    TrajectoryBatch,
    combine_sft,
    death_edges,
    extract_bridges,
    scheduler_update,
    topo_tpo_loss,
    tpo_loss,
    trajectory_cloud,
    ttl_loss,
)
from topoalign.io import read_preference_batch, read_trajectory_batch
from topoalign.scheduler import SchedulerConfig, SchedulerState

__all__ = [
    "BoundBatch",
    "BoundLoss",
    "SchedulerConfig",
    "SchedulerState",
    "bound_topo_tpo",
    "bound_tpo",
    "bound_ttl",
    "death_edges",
    "extract_bridges",
    "load_preference_jsonl",
    "load_trajectory_jsonl",
    "scheduler_update",
]


def _check_array(name: str, arr) -> np.ndarray:
    if arr is None:
        return None
    if not isinstance(arr, np.ndarray):
        raise TypeError(f"{name}: expected a numpy array, got {type(arr).__name__}")
    if arr.dtype not in (np.float32, np.float64):
        raise TypeError(f"{name}: dtype must be float32 or float64, got {arr.dtype}")
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D (batch, dim) array, got shape {arr.shape}")
    if not arr.flags["C_CONTIGUOUS"]:
        raise ValueError(f"{name}: array must be C-contiguous (row-major)")
    return arr


@dataclass
class BoundBatch:
    """Dense batch container; fill the trajectory or the preference fields."""

    h_prompt: np.ndarray | None = None
    h_model: np.ndarray | None = None
    h_gold: np.ndarray | None = None
    h_chosen: np.ndarray | None = None
    h_rejected: np.ndarray | None = None
    topic_ids: list | None = None
    ids: list | None = None

    def __post_init__(self):
        for name in ("h_prompt", "h_model", "h_gold", "h_chosen", "h_rejected"):
            setattr(self, name, _check_array(name, getattr(self, name)))

    def _ids(self, n: int) -> list:
        if self.ids is None:
            return [f"item{i}" for i in range(n)]
        if len(self.ids) != n:
            raise ValueError(f"ids: expected {n} entries, got {len(self.ids)}")
        return list(self.ids)

    def trajectory(self) -> TrajectoryBatch:
        for name in ("h_prompt", "h_model", "h_gold"):
            if getattr(self, name) is None:
                raise ValueError(f"{name}: required for a trajectory batch")
        return TrajectoryBatch(
            h_prompt=self.h_prompt.astype(np.float64),
            h_model=self.h_model.astype(np.float64),
            h_gold=self.h_gold.astype(np.float64),
            ids=self._ids(self.h_prompt.shape[0]),
        )

    def preference(self) -> PreferenceBatch:
        for name in ("h_chosen", "h_rejected"):
            if getattr(self, name) is None:
                raise ValueError(f"{name}: required for a preference batch")
        if self.topic_ids is None:
            raise ValueError("topic_ids: required for a preference batch")
        return PreferenceBatch(
            h_chosen=self.h_chosen.astype(np.float64),
            h_rejected=self.h_rejected.astype(np.float64),
            topic_ids=self.topic_ids,
            ids=self._ids(self.h_chosen.shape[0]),
        )


class BoundLoss(NamedTuple):
    """Raw loss value, unscaled gradients, optional combined objective."""

    loss: float
    grads: dict
    combined: float | None = None


def bound_ttl(
    batch: BoundBatch, lambda_topo: float = 0.2, ce: float | None = None,
    want_grads: bool = True,
) -> BoundLoss:
    """Trajectory topology loss over a dense batch.

    Bridges are recomputed from the prompt/gold rows.  `grads` hold
    d(loss)/dh_model and dh_prompt (unscaled; the host's chain rule applies
    lambda_topo).  With `ce` given, `combined` = ce + lambda_topo * loss.
    """
    traj = batch.trajectory()
    cloud = trajectory_cloud(traj)
    bridges = extract_bridges(cloud, death_edges(cloud))
    res = ttl_loss(traj, bridges, want_grads=want_grads)
    combined = combine_sft(ce, res.value, lambda_topo) if ce is not None else None
    return BoundLoss(loss=res.value, grads=res.grads or {}, combined=combined)


def _library_from_vectors(topic_vectors: dict) -> TopicLibrary:
    dim_s = len(next(iter(topic_vectors.values())))
    topics = [
        Topic(
            topic_id=int(tid),
            name=f"topic-{tid}",
            centroid=np.zeros(dim_s),
            u=np.asarray(u, dtype=np.float64),
            member_count=1,
        )
        for tid, u in topic_vectors.items()
    ]
    return TopicLibrary(K=len(topics), dim_s=dim_s, topics=topics)


def bound_tpo(
    batch: BoundBatch,
    topic_vectors: dict,
    projection: np.ndarray,
    ln_eps: float = 1e-5,
    use_layer_norm: bool = True,
    want_grads: bool = True,
) -> BoundLoss:
    """Topic-preference loss; grads carry 'delta_h' (B, d) and 'P' (d, d_s).

    To drive the loss from a pre-computed delta_h (e.g. the host already
    applied its own layer norm), pass h_chosen=delta_h, h_rejected=zeros and
    use_layer_norm=False.
    """
    pref = batch.preference()
    lib = _library_from_vectors(topic_vectors)
    proj = Projection(values=np.asarray(projection, dtype=np.float64), seed=0)
    res = tpo_loss(
        pref, lib, proj, ln_eps=ln_eps, want_grads=want_grads,
        use_layer_norm=use_layer_norm,
    )
    return BoundLoss(loss=res.value, grads=res.grads or {})


def bound_topo_tpo(
    batch: BoundBatch,
    topic_vectors: dict,
    projection: np.ndarray,
    want_grads: bool = True,
) -> BoundLoss:
    """Fully topological preference loss; grads carry 'P' only."""
    pref = batch.preference()
    lib = _library_from_vectors(topic_vectors)
    proj = Projection(values=np.asarray(projection, dtype=np.float64), seed=0)
    res = topo_tpo_loss(pref, lib, proj, want_grads=want_grads)
    return BoundLoss(loss=res.value, grads=res.grads or {})


def load_trajectory_jsonl(path) -> BoundBatch:
    """Shared-fixture loader: same jsonl format as the `ttl` subcommand."""
    traj = read_trajectory_batch(path)
    return BoundBatch(
        h_prompt=np.ascontiguousarray(traj.h_prompt),
        h_model=np.ascontiguousarray(traj.h_model),
        h_gold=np.ascontiguousarray(traj.h_gold),
        ids=traj.ids,
    )


def load_preference_jsonl(path) -> BoundBatch:
    """Shared-fixture loader: same jsonl format as the `tpo` subcommand."""
    pref = read_preference_batch(path)
    return BoundBatch(
        h_chosen=np.ascontiguousarray(pref.h_chosen),
        h_rejected=np.ascontiguousarray(pref.h_rejected),
        topic_ids=pref.topic_ids,
        ids=pref.ids,
    )
