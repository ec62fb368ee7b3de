"""Topology-enhanced alignment losses over embedding point clouds.

Bridges between labeled point sets come from 0D persistent homology
(union-find death edges == minimum spanning forest); trajectory and
preference losses align model update directions with those bridges or with
topic-specific preference vectors.  Embedding dumps come from files; the
losses return values and analytic gradients for an external training stack.
"""

from .analysis import (
    BridgeStats,
    CosineRecord,
    Histogram,
    PairingStats,
    TopicGainRow,
    bridge_statistics,
    cosine_distribution,
    per_topic_gains,
)
from .backend import backend_name
from .errors import (
    AllMaskedError,
    BadMagicError,
    DegenerateTargetError,
    DimMismatchError,
    EmptyTemplateSetError,
    FormatError,
    LabelOutOfRangeError,
    LabelerUnavailableError,
    LayoutError,
    MalformedRecordError,
    MissingScoreError,
    NonFiniteLossError,
    SingleLabelCloudError,
    TooFewPointsError,
    TopoAlignError,
    TruncatedPayloadError,
    UnknownTopicError,
    ValidationError,
)
from .geometry import (
    TokenMatrix,
    cosine,
    cosine_loss_grad,
    layer_norm,
    masked_mean_pool,
    pairwise_distances,
)
from .losses import (
    LossResult,
    PreferenceBatch,
    Projection,
    TrajectoryBatch,
    combine_dpo,
    combine_sft,
    init_projection,
    preference_cloud,
    topo_tpo_loss,
    tpo_loss,
    trajectory_cloud,
    ttl_loss,
)
from .persistence import (
    Bridge,
    DeathEdge,
    LabeledPointCloud,
    UnionFind,
    baseline_pairs,
    death_edges,
    extract_bridges,
)
from .scheduler import SchedulerConfig, SchedulerState, scheduler_update, simulate
from .topics import (
    TemplatePair,
    Topic,
    TopicLibrary,
    assign_topic,
    build_topic_vector,
    default_template_pairs,
    kmeans_cluster,
    label_clusters,
    merge_small_topics,
    read_library,
    write_library,
)

__version__ = "0.1.0"

__all__ = [
    "AllMaskedError",
    "BadMagicError",
    "Bridge",
    "BridgeStats",
    "CosineRecord",
    "DeathEdge",
    "DegenerateTargetError",
    "DimMismatchError",
    "EmptyTemplateSetError",
    "FormatError",
    "Histogram",
    "LabelOutOfRangeError",
    "LabeledPointCloud",
    "LabelerUnavailableError",
    "LayoutError",
    "LossResult",
    "MalformedRecordError",
    "MissingScoreError",
    "NonFiniteLossError",
    "PairingStats",
    "PreferenceBatch",
    "Projection",
    "SchedulerConfig",
    "SchedulerState",
    "SingleLabelCloudError",
    "TemplatePair",
    "TokenMatrix",
    "TooFewPointsError",
    "TopoAlignError",
    "Topic",
    "TopicGainRow",
    "TopicLibrary",
    "TrajectoryBatch",
    "TruncatedPayloadError",
    "UnionFind",
    "UnknownTopicError",
    "ValidationError",
    "assign_topic",
    "backend_name",
    "baseline_pairs",
    "bridge_statistics",
    "build_topic_vector",
    "combine_dpo",
    "combine_sft",
    "cosine",
    "cosine_distribution",
    "cosine_loss_grad",
    "death_edges",
    "default_template_pairs",
    "extract_bridges",
    "init_projection",
    "kmeans_cluster",
    "label_clusters",
    "layer_norm",
    "masked_mean_pool",
    "merge_small_topics",
    "pairwise_distances",
    "per_topic_gains",
    "preference_cloud",
    "read_library",
    "scheduler_update",
    "simulate",
    "topo_tpo_loss",
    "tpo_loss",
    "trajectory_cloud",
    "ttl_loss",
    "write_library",
]
