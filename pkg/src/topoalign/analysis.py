"""Post-hoc diagnostics: cosine distributions, per-topic gains, bridge stats."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import MissingScoreError, SingleLabelCloudError, ValidationError
from .persistence import LabeledPointCloud, death_edges, extract_bridges

KIND_TRAJECTORY = "trajectory_rho"
KIND_IMPROVEMENT = "improvement_sigma"


@dataclass
class CosineRecord:
    """One per-example cosine diagnostic (rho or sigma), clamped to [-1, 1]."""

    id: str
    value: float
    kind: str
    topic_id: int | None = None

    def __post_init__(self):
        if self.kind not in (KIND_TRAJECTORY, KIND_IMPROVEMENT):
            raise ValidationError(f"unknown record kind {self.kind!r}")
        self.value = float(np.clip(self.value, -1.0, 1.0))


@dataclass
class Histogram:
    bins: int
    edges: np.ndarray
    counts: np.ndarray


@dataclass
class TopicGainRow:
    topic_id: int
    mean_sigma: float
    delta_rm: float
    delta_help: float
    n: int


@dataclass
class PairingStats:
    count: int
    length_quantiles: tuple
    mean_length: float


@dataclass
class BridgeStats:
    """PH-bridge structure next to the kNN pairing on the same cloud."""

    bridge_count: int
    length_quantiles: tuple
    mean_length: float
    comparison: PairingStats


def cosine_distribution(records, bins: int) -> Histogram:
    """Equal-width histogram of record values over [-1, 1]."""
    if bins < 1:
        raise ValidationError("bins must be >= 1")
    values = np.array([r.value for r in records], dtype=np.float64)
    counts, edges = np.histogram(values, bins=bins, range=(-1.0, 1.0))
    return Histogram(bins=bins, edges=edges, counts=counts)


def per_topic_gains(sigmas, scores_a, scores_b) -> list:
    """Per-topic mean sigma and score deltas (file b minus file a).

    `scores_*` map example id -> (rm, help).  Every sigma record needs a
    topic id and an entry in both score maps.
    """
    groups: dict = {}
    for rec in sigmas:
        if rec.topic_id is None:
            raise ValidationError(f"record {rec.id!r} has no topic_id")
        groups.setdefault(int(rec.topic_id), []).append(rec)
    rows = []
    for tid in sorted(groups):
        recs = groups[tid]
        rm_a = []
        rm_b = []
        help_a = []
        help_b = []
        for rec in recs:
            for name, table, rm_list, help_list in (
                ("a", scores_a, rm_a, help_a),
                ("b", scores_b, rm_b, help_b),
            ):
                if rec.id not in table:
                    raise MissingScoreError(f"id {rec.id!r} missing from scores {name}")
                rm, hlp = table[rec.id]
                rm_list.append(float(rm))
                help_list.append(float(hlp))
        rows.append(
            TopicGainRow(
                topic_id=tid,
                mean_sigma=float(np.mean([r.value for r in recs])),
                delta_rm=float(np.mean(rm_b) - np.mean(rm_a)),
                delta_help=float(np.mean(help_b) - np.mean(help_a)),
                n=len(recs),
            )
        )
    return rows


def _length_stats(lengths: np.ndarray) -> PairingStats:
    qs = np.quantile(lengths, [0.0, 0.25, 0.5, 0.75, 1.0])  # linear interpolation
    return PairingStats(
        count=int(lengths.size),
        length_quantiles=tuple(float(q) for q in qs),
        mean_length=float(lengths.mean()),
    )


def bridge_statistics(cloud: LabeledPointCloud) -> BridgeStats:
    """Bridge count/length quantiles for PH bridges vs the kNN pairing."""
    labels = cloud.labels
    if not (labels == 0).any() or not (labels == 1).any():
        raise SingleLabelCloudError("bridge statistics need both labels present")
    bridges = extract_bridges(cloud, death_edges(cloud))
    ph_lengths = np.array(
        [float(np.linalg.norm(b.direction)) for b in bridges], dtype=np.float64
    )
    src, tgt = _kernels.nearest_cross(cloud.points, labels)
    knn_lengths = np.linalg.norm(cloud.points[tgt] - cloud.points[src], axis=1)
    ph = _length_stats(ph_lengths)
    return BridgeStats(
        bridge_count=ph.count,
        length_quantiles=ph.length_quantiles,
        mean_length=ph.mean_length,
        comparison=_length_stats(knn_lengths),
    )
