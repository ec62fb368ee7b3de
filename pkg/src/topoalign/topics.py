"""Offline topic library: clustering, preference vectors, labeling, storage.

Sentence embeddings are ingested, never computed; the encoder is an
external dependency whose vectors arrive through the point-cloud formats.
Clustering is full-batch Lloyd's from a seeded k-means++ init, so library
construction is exactly reproducible.
"""

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import (
    DimMismatchError,
    EmptyTemplateSetError,
    LabelerUnavailableError,
    TooFewPointsError,
    UnknownTopicError,
    ValidationError,
)
from .formatting import format_g9

DEFAULT_K = 50
DEFAULT_MIN_MEMBERS = 50
DEFAULT_LABEL_SAMPLE = 32
LIBRARY_MAGIC = "TOPOLIB"
LIBRARY_VERSION = 1


@dataclass
class Topic:
    topic_id: int
    name: str
    centroid: np.ndarray
    u: np.ndarray
    member_count: int

    def __post_init__(self):
        self.centroid = np.asarray(self.centroid, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.float64)
        if self.centroid.shape != self.u.shape:
            raise DimMismatchError("topic centroid and u must share dim_s")
        if "\n" in self.name or "\r" in self.name:
            raise ValidationError("topic names must be single-line")


@dataclass
class TopicLibrary:
    """Versioned collection of topics with their preference vectors."""

    K: int
    dim_s: int
    topics: list
    other_topic_id: int = -1
    version: int = LIBRARY_VERSION
    created_by: str = "topoalign/0.1.0"
    seed: int | None = None
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.topics = sorted(self.topics, key=lambda t: t.topic_id)
        ids = [t.topic_id for t in self.topics]
        if len(set(ids)) != len(ids):
            raise ValidationError("topic ids must be unique")
        for t in self.topics:
            if t.u.shape != (self.dim_s,):
                raise DimMismatchError(
                    f"topic {t.topic_id} u dim {t.u.shape} != dim_s {self.dim_s}"
                )

    def topic(self, topic_id: int) -> Topic:
        for t in self.topics:
            if t.topic_id == topic_id:
                return t
        raise UnknownTopicError(f"topic id {topic_id} not in library")

    def topic_vector(self, topic_id: int) -> np.ndarray:
        return self.topic(topic_id).u

    def validate_members(self, min_members: int = DEFAULT_MIN_MEMBERS) -> None:
        """Post-merge invariant: every non-'other' topic meets the floor."""
        for t in self.topics:
            if t.topic_id != self.other_topic_id and t.member_count < min_members:
                raise ValidationError(
                    f"topic {t.topic_id} has {t.member_count} members < {min_members}"
                )


@dataclass(frozen=True)
class TemplatePair:
    """Positive/negative sentence templates, each with exactly one {t} slot."""

    positive: str
    negative: str

    def __post_init__(self):
        for side in (self.positive, self.negative):
            if side.count("{t}") != 1:
                raise ValidationError(f"template needs exactly one {{t}} slot: {side!r}")

    def instantiate(self, topic_name: str):
        return self.positive.replace("{t}", topic_name), self.negative.replace(
            "{t}", topic_name
        )


def default_template_pairs() -> list:
    """The shipped template set (a data file users can replace)."""
    raw = json.loads(
        resources.files("topoalign").joinpath("data/templates.json").read_text("utf-8")
    )
    return [TemplatePair(p["positive"], p["negative"]) for p in raw["pairs"]]


# ---------------------------------------------------------------------------
# clustering

def _kmeanspp_init(X: np.ndarray, k: int, rng) -> np.ndarray:
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[int(rng.integers(X.shape[0]))]
    closest = ((X - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(rng.choice(X.shape[0], p=closest / total))
        else:
            idx = int(rng.integers(X.shape[0]))  # remaining points coincide
        centroids[c] = X[idx]
        closest = np.minimum(closest, ((X - centroids[c]) ** 2).sum(axis=1))
    return centroids


def kmeans_cluster(embeddings, k: int, seed: int, max_iters: int = 100, history=None):
    """Seeded k-means++ followed by full-batch Lloyd's iterations.

    Stops when no assignment changes or max_iters is hit.  Empty clusters
    are re-seeded to the point currently farthest from its own centroid
    (deterministic; ties broken by lowest point index).  When `history` is a
    list, the inertia after each assignment step is appended to it.
    Returns (assignments, centroids).
    """
    X = np.asarray(embeddings, dtype=np.float64)
    if X.ndim != 2:
        raise DimMismatchError("embeddings must be 2-D")
    n = X.shape[0]
    if k < 1 or k > n:
        raise TooFewPointsError(f"need 1 <= K <= {n} points, got K={k}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iters):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        own = d2[np.arange(n), new_assign]
        if history is not None:
            history.append(float(own.sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = X[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        # re-seed empty clusters; each steals a distinct farthest point
        stealable = own.copy()
        for c in range(k):
            if (assign == c).any():
                continue
            p = int(stealable.argmax())
            centroids[c] = X[p]
            stealable[p] = -1.0
    return assign, centroids


def build_topic_vector(pairs) -> np.ndarray:
    """Preference vector u_t: mean of (e_pos - e_neg) over embedded pairs."""
    if not pairs:
        raise EmptyTemplateSetError("no embedded template pairs for topic")
    diffs = [np.asarray(p, dtype=np.float64) - np.asarray(n, dtype=np.float64)
             for p, n in pairs]
    dims = {d.shape for d in diffs}
    if len(dims) != 1:
        raise DimMismatchError("embedded template pairs must share dim_s")
    return np.mean(diffs, axis=0)


def merge_small_topics(
    library: TopicLibrary, min_members: int = DEFAULT_MIN_MEMBERS
) -> TopicLibrary:
    """Merge topics below the member floor into one 'other' topic.

    The merged topic's u (and centroid) is the member-count-weighted mean of
    the removed topics'; total member count is conserved.
    """
    if min_members < 1:
        raise ValidationError("min_members must be >= 1")
    drop = [t for t in library.topics if t.member_count < min_members]
    if not drop:
        return replace(library, topics=list(library.topics))
    keep = [t for t in library.topics if t.member_count >= min_members]
    counts = np.array([t.member_count for t in drop], dtype=np.float64)
    total = counts.sum()
    u_other = np.sum([c * t.u for c, t in zip(counts, drop)], axis=0) / total
    centroid_other = (
        np.sum([c * t.centroid for c, t in zip(counts, drop)], axis=0) / total
    )
    other_id = max(t.topic_id for t in library.topics) + 1
    other = Topic(
        topic_id=other_id,
        name="other",
        centroid=centroid_other,
        u=u_other,
        member_count=int(total),
    )
    warnings = list(library.warnings)
    if "other_u_weighted_mean" not in warnings:
        warnings.append("other_u_weighted_mean")
    return replace(
        library,
        topics=keep + [other],
        other_topic_id=other_id,
        warnings=warnings,
    )


def assign_topic(prompt_embedding, library: TopicLibrary) -> int:
    """Topic whose centroid is nearest (Euclidean); ties -> lowest topic_id."""
    e = np.asarray(prompt_embedding, dtype=np.float64)
    if e.shape != (library.dim_s,):
        raise DimMismatchError(f"embedding dim {e.shape} != dim_s {library.dim_s}")
    centroids = np.array([t.centroid for t in library.topics])
    d2 = ((centroids - e) ** 2).sum(axis=1)
    return library.topics[int(d2.argmin())].topic_id


# ---------------------------------------------------------------------------
# labeling

class StaticLabeler:
    """Offline labeler reading names from a fixed {cluster_id: name} mapping."""

    def __init__(self, mapping):
        self.mapping = {int(k): str(v) for k, v in mapping.items()}

    def label(self, cluster_id: int, prompts) -> str:
        try:
            return self.mapping[cluster_id]
        except KeyError:
            raise LabelerUnavailableError(f"no name for cluster {cluster_id}") from None


class HttpLabelerClient:
    """POSTs {cluster_id, prompts[]} to an endpoint and expects {name}.

    The bearer token comes from the TOPOALIGN_LABELER_TOKEN environment
    variable unless given explicitly.  `post` is injectable for testing.
    """

    def __init__(self, endpoint: str, token: str | None = None, post=None, timeout=10.0):
        import os

        if post is None:
            import requests

            post = requests.post
        self.endpoint = endpoint
        self.token = token if token is not None else os.environ.get(
            "TOPOALIGN_LABELER_TOKEN", ""
        )
        self._post = post
        self.timeout = timeout

    def label(self, cluster_id: int, prompts) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self._post(
                self.endpoint,
                json={"cluster_id": int(cluster_id), "prompts": list(prompts)},
                headers=headers,
                timeout=self.timeout,
            )
        except Exception as exc:
            raise LabelerUnavailableError(f"labeler POST failed: {exc}") from exc
        if getattr(resp, "status_code", 500) != 200:
            raise LabelerUnavailableError(
                f"labeler returned status {getattr(resp, 'status_code', '?')}"
            )
        try:
            return str(resp.json()["name"])
        except Exception as exc:
            raise LabelerUnavailableError(f"malformed labeler response: {exc}") from exc


def _valid_name(name: str) -> bool:
    words = name.split()
    return 1 <= len(words) <= 3 and "\n" not in name


def label_clusters(
    centroids,
    sample_prompts,
    client,
    m: int = DEFAULT_LABEL_SAMPLE,
    seed: int | None = None,
):
    """Name each cluster via the labeler; returns (names, warning_flag).

    Up to `m` prompts per cluster are sampled (seeded) and sent.  A name
    failing the strict 1-3 word check falls back to 'cluster-<id>'.  If the
    labeler is unreachable, every remaining cluster gets the fallback name.
    Offline operation: pass a StaticLabeler.
    """
    n_clusters = len(centroids)
    rng = np.random.default_rng(seed)
    names = []
    warning = False
    unavailable = False
    for cid in range(n_clusters):
        fallback = f"cluster-{cid}"
        if unavailable or client is None:
            names.append(fallback)
            continue
        prompts = list(sample_prompts[cid]) if cid < len(sample_prompts) else []
        if len(prompts) > m:
            picked = rng.choice(len(prompts), size=m, replace=False)
            prompts = [prompts[i] for i in sorted(picked)]
        try:
            name = client.label(cid, prompts)
        except LabelerUnavailableError:
            unavailable = True
            warning = True
            names.append(fallback)
            continue
        if _valid_name(name):
            names.append(name)
        else:
            warning = True
            names.append(fallback)
    if client is None:
        warning = True
    return names, warning


# ---------------------------------------------------------------------------
# serialization: line-based text format; rewriting an unmodified library is
# byte-identical because every field goes through the same formatter.

def _fmt_vec(v: np.ndarray) -> str:
    return " ".join(format_g9(float(x)) for x in v)


def dumps_library(lib: TopicLibrary) -> str:
    lines = [f"{LIBRARY_MAGIC} {lib.version}"]
    lines.append(f"k {lib.K}")
    lines.append(f"dim_s {lib.dim_s}")
    lines.append(f"created_by {lib.created_by}")
    lines.append(f"seed {'none' if lib.seed is None else lib.seed}")
    lines.append(f"other_topic {lib.other_topic_id}")
    lines.append(f"warnings {','.join(lib.warnings) if lib.warnings else '-'}")
    lines.append(f"ntopics {len(lib.topics)}")
    for t in lib.topics:
        lines.append(f"topic {t.topic_id} {t.member_count} {t.name}")
        lines.append(f"centroid {_fmt_vec(t.centroid)}")
        lines.append(f"u {_fmt_vec(t.u)}")
    return "\n".join(lines) + "\n"


def _expect(line: str, key: str) -> str:
    if not line.startswith(key + " "):
        raise ValidationError(f"library file: expected '{key} ...', got {line!r}")
    return line[len(key) + 1 :]


def loads_library(text: str) -> TopicLibrary:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(LIBRARY_MAGIC + " "):
        raise ValidationError("not a topic library file")
    version = int(lines[0].split()[1])
    if version != LIBRARY_VERSION:
        raise ValidationError(f"unsupported library version {version}")
    k = int(_expect(lines[1], "k"))
    dim_s = int(_expect(lines[2], "dim_s"))
    created_by = _expect(lines[3], "created_by")
    seed_raw = _expect(lines[4], "seed")
    seed = None if seed_raw == "none" else int(seed_raw)
    other = int(_expect(lines[5], "other_topic"))
    warn_raw = _expect(lines[6], "warnings")
    warnings = [] if warn_raw == "-" else warn_raw.split(",")
    ntopics = int(_expect(lines[7], "ntopics"))
    topics = []
    pos = 8
    for _ in range(ntopics):
        head = _expect(lines[pos], "topic").split(" ", 2)
        if len(head) != 3:
            raise ValidationError(f"malformed topic line: {lines[pos]!r}")
        tid, count, name = int(head[0]), int(head[1]), head[2]
        centroid = np.array(
            [float(x) for x in _expect(lines[pos + 1], "centroid").split()]
        )
        u = np.array([float(x) for x in _expect(lines[pos + 2], "u").split()])
        topics.append(Topic(tid, name, centroid, u, count))
        pos += 3
    return TopicLibrary(
        K=k,
        dim_s=dim_s,
        topics=topics,
        other_topic_id=other,
        version=version,
        created_by=created_by,
        seed=seed,
        warnings=warnings,
    )


def write_library(lib: TopicLibrary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_library(lib))


def read_library(path) -> TopicLibrary:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_library(fh.read())
