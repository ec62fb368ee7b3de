"""Bit-exact file formats and run configuration.

Point clouds travel either as a little-endian binary container (magic
"TPCL") or as JSON lines.  Both store vectors at f32 precision: the binary
payload is raw f32 and the jsonl writer prints the f32 values with 9
significant digits, so the two encodings parse to identical in-memory
clouds.  Values are widened to f64 on read.
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagicError,
    DimMismatchError,
    FormatError,
    LabelOutOfRangeError,
    MalformedRecordError,
    TruncatedPayloadError,
    ValidationError,
)
from .formatting import format_g9, json9_dumps
from .losses import PreferenceBatch, Projection, TrajectoryBatch
from .persistence import LabeledPointCloud
from .scheduler import SchedulerConfig

MAGIC = b"TPCL"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<HHQIB3x")  # version, flags, n, d, label_width, pad


def _quantize_f32(values: np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=np.float32)


def write_point_cloud(cloud: LabeledPointCloud, path, fmt: str = "bin") -> None:
    if fmt == "bin":
        _write_cloud_bin(cloud, path)
    elif fmt == "jsonl":
        _write_cloud_jsonl(cloud, path)
    else:
        raise ValidationError(f"unknown point-cloud format {fmt!r}")


def _write_cloud_bin(cloud: LabeledPointCloud, path) -> None:
    meta = json.dumps({"ids": cloud.ids}, separators=(",", ":"), sort_keys=True)
    meta_bytes = meta.encode("utf-8")
    payload = _quantize_f32(cloud.points)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(FORMAT_VERSION, 0, cloud.n, cloud.d, 1))
        fh.write(cloud.labels.astype(np.uint8).tobytes())
        fh.write(payload.astype("<f4").tobytes(order="C"))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)


def _write_cloud_jsonl(cloud: LabeledPointCloud, path) -> None:
    q = _quantize_f32(cloud.points)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(cloud.n):
            rec = {
                "id": cloud.ids[i],
                "label": int(cloud.labels[i]),
                "vec": [float(x) for x in q[i]],
            }
            fh.write(json9_dumps(rec) + "\n")


def sniff_format(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "bin" if head == MAGIC else "jsonl"


def read_point_cloud(path, fmt: str = "auto") -> LabeledPointCloud:
    if fmt == "auto":
        fmt = sniff_format(path)
    if fmt == "bin":
        return _read_cloud_bin(path)
    if fmt == "jsonl":
        return _read_cloud_jsonl(path)
    raise ValidationError(f"unknown point-cloud format {fmt!r}")


def _read_cloud_bin(path) -> LabeledPointCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: missing TPCL magic")
    off = 4
    if len(blob) < off + _HEADER.size:
        raise TruncatedPayloadError(f"{path}: truncated header")
    version, flags, n, d, label_width = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if label_width != 1:
        raise FormatError(f"{path}: unsupported label width {label_width}")
    need = n * label_width
    if len(blob) < off + need:
        raise TruncatedPayloadError(f"{path}: labels truncated")
    labels = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off).copy()
    off += need
    if (labels > 1).any():
        raise LabelOutOfRangeError(f"{path}: label byte outside {{0,1}}")
    need = n * d * 4
    if len(blob) < off + need:
        raise TruncatedPayloadError(f"{path}: vector payload truncated")
    pts = (
        np.frombuffer(blob, dtype="<f4", count=n * d, offset=off)
        .astype(np.float64)
        .reshape(n, d)
    )
    off += need
    if len(blob) < off + 4:
        raise TruncatedPayloadError(f"{path}: metadata length truncated")
    (meta_len,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) < off + meta_len:
        raise TruncatedPayloadError(f"{path}: metadata truncated")
    if len(blob) != off + meta_len:
        raise FormatError(f"{path}: {len(blob) - off - meta_len} trailing bytes")
    try:
        meta = json.loads(blob[off : off + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad metadata block: {exc}") from exc
    ids = meta.get("ids", [f"p{i}" for i in range(n)])
    if len(ids) != n:
        raise FormatError(f"{path}: metadata ids length {len(ids)} != n {n}")
    return LabeledPointCloud(points=pts, labels=labels, ids=ids)


def _read_cloud_jsonl(path) -> LabeledPointCloud:
    ids, labels, rows = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if not isinstance(rec, dict) or not {"id", "label", "vec"} <= rec.keys():
                raise MalformedRecordError(
                    f"{path}:{lineno}: record needs id/label/vec fields"
                )
            if rec["label"] not in (0, 1):
                raise LabelOutOfRangeError(f"{path}:{lineno}: label {rec['label']!r}")
            vec = rec["vec"]
            if not isinstance(vec, list) or not vec:
                raise MalformedRecordError(f"{path}:{lineno}: vec must be a non-empty list")
            if rows and len(vec) != len(rows[0]):
                raise MalformedRecordError(
                    f"{path}:{lineno}: vec dim {len(vec)} != {len(rows[0])}"
                )
            ids.append(str(rec["id"]))
            labels.append(int(rec["label"]))
            rows.append([float(x) for x in vec])
    if not rows:
        raise MalformedRecordError(f"{path}: empty point cloud")
    pts = np.asarray(rows, dtype=np.float32).astype(np.float64)
    return LabeledPointCloud(
        points=pts, labels=np.asarray(labels, dtype=np.uint8), ids=ids
    )


# ---------------------------------------------------------------------------
# batch files (jsonl, f32 precision like clouds)

def write_trajectory_batch(batch: TrajectoryBatch, path) -> None:
    hp, hm, hg = (
        _quantize_f32(batch.h_prompt),
        _quantize_f32(batch.h_model),
        _quantize_f32(batch.h_gold),
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(batch.size):
            rec = {
                "id": batch.ids[i],
                "h_prompt": [float(x) for x in hp[i]],
                "h_model": [float(x) for x in hm[i]],
                "h_gold": [float(x) for x in hg[i]],
            }
            fh.write(json9_dumps(rec) + "\n")


def read_trajectory_batch(path) -> TrajectoryBatch:
    recs = _read_jsonl_records(path, {"id", "h_prompt", "h_model", "h_gold"})
    return TrajectoryBatch(
        h_prompt=_stack(recs, "h_prompt", path),
        h_model=_stack(recs, "h_model", path),
        h_gold=_stack(recs, "h_gold", path),
        ids=[r["id"] for r in recs],
    )


def write_preference_batch(batch: PreferenceBatch, path) -> None:
    hc, hr = _quantize_f32(batch.h_chosen), _quantize_f32(batch.h_rejected)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(batch.size):
            rec = {
                "id": batch.ids[i],
                "h_chosen": [float(x) for x in hc[i]],
                "h_rejected": [float(x) for x in hr[i]],
                "topic_id": batch.topic_ids[i],
            }
            fh.write(json9_dumps(rec) + "\n")


def read_preference_batch(path) -> PreferenceBatch:
    recs = _read_jsonl_records(path, {"id", "h_chosen", "h_rejected", "topic_id"})
    return PreferenceBatch(
        h_chosen=_stack(recs, "h_chosen", path),
        h_rejected=_stack(recs, "h_rejected", path),
        topic_ids=[int(r["topic_id"]) for r in recs],
        ids=[r["id"] for r in recs],
    )


def _read_jsonl_records(path, required) -> list:
    recs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"{path}:{lineno}: bad JSON: {exc}") from exc
            if not isinstance(rec, dict) or not required <= rec.keys():
                missing = required - set(rec) if isinstance(rec, dict) else required
                raise MalformedRecordError(
                    f"{path}:{lineno}: missing fields {sorted(missing)}"
                )
            recs.append(rec)
    if not recs:
        raise MalformedRecordError(f"{path}: no records")
    return recs


def _stack(recs, key, path) -> np.ndarray:
    try:
        arr = np.asarray([r[key] for r in recs], dtype=np.float32).astype(np.float64)
    except ValueError as exc:
        raise MalformedRecordError(f"{path}: ragged {key} vectors: {exc}") from exc
    if arr.ndim != 2:
        raise MalformedRecordError(f"{path}: {key} vectors must be 1-D lists")
    return arr


# ---------------------------------------------------------------------------
# embedded template pairs for topic building

def read_template_embeddings(path) -> dict:
    """jsonl {topic_id, e_pos, e_neg} -> {topic_id: [(e_pos, e_neg), ...]}."""
    recs = _read_jsonl_records(path, {"topic_id", "e_pos", "e_neg"})
    out: dict = {}
    for r in recs:
        out.setdefault(int(r["topic_id"]), []).append(
            (
                np.asarray(r["e_pos"], dtype=np.float64),
                np.asarray(r["e_neg"], dtype=np.float64),
            )
        )
    return out


# ---------------------------------------------------------------------------
# score files: delimited text "id,rm,help"

def read_scores(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in (line.split(",") if "," in line else line.split())]
            if len(parts) != 3:
                raise MalformedRecordError(f"{path}:{lineno}: expected id,rm,help")
            try:
                rm, hlp = float(parts[1]), float(parts[2])
            except ValueError as exc:
                if not out and parts[0] == "id":
                    continue  # optional header row
                raise MalformedRecordError(f"{path}:{lineno}: bad number: {exc}") from exc
            out[parts[0]] = (rm, hlp)
    return out


# ---------------------------------------------------------------------------
# cosine-diagnostic records for the analyze subcommand

def read_cosine_records(path) -> list:
    from .analysis import CosineRecord

    recs = _read_jsonl_records(path, {"id", "value", "kind"})
    out = []
    for r in recs:
        topic = r.get("topic_id")
        out.append(
            CosineRecord(
                id=str(r["id"]),
                value=float(r["value"]),
                kind=str(r["kind"]),
                topic_id=None if topic is None else int(topic),
            )
        )
    return out


# ---------------------------------------------------------------------------
# projection file

def write_projection(proj: Projection, path) -> None:
    doc = {
        "seed": proj.seed,
        "d": proj.d,
        "d_s": proj.d_s,
        "values": [[float(x) for x in row] for row in proj.values],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json9_dumps(doc) + "\n")


def read_projection(path) -> Projection:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"{path}: bad projection file: {exc}") from exc
    try:
        values = np.asarray(doc["values"], dtype=np.float64)
        proj = Projection(values=values, seed=int(doc["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecordError(f"{path}: bad projection file: {exc}") from exc
    if proj.values.shape != (int(doc.get("d", proj.d)), int(doc.get("d_s", proj.d_s))):
        raise MalformedRecordError(f"{path}: projection shape mismatch with header")
    return proj


# ---------------------------------------------------------------------------
# run configuration

@dataclass
class RunConfig:
    """Knobs shared across CLI subcommands; defaults follow the reported setup."""

    lambda_topo: float = 0.2
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    ln_eps: float = 1e-5
    cosine_eps: float = 1e-12
    seed: int | None = None
    layer_tag: str = "-4"
    format: str = "auto"

    def __post_init__(self):
        if self.format not in ("auto", "bin", "jsonl"):
            raise ValidationError(f"format must be auto|bin|jsonl, got {self.format!r}")


def load_run_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(f"{path}: bad config: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedRecordError(f"{path}: config must be a JSON object")
    sched_doc = doc.pop("scheduler", {})
    known = {"lambda_topo", "ln_eps", "cosine_eps", "seed", "layer_tag", "format"}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    try:
        scheduler = SchedulerConfig(**sched_doc)
    except TypeError as exc:
        raise ValidationError(f"{path}: bad scheduler section: {exc}") from exc
    return RunConfig(scheduler=scheduler, **doc)


__all__ = [
    "MAGIC",
    "FORMAT_VERSION",
    "RunConfig",
    "format_g9",
    "json9_dumps",
    "load_run_config",
    "read_point_cloud",
    "read_preference_batch",
    "read_projection",
    "read_scores",
    "read_template_embeddings",
    "read_trajectory_batch",
    "sniff_format",
    "write_point_cloud",
    "write_preference_batch",
    "write_projection",
    "write_trajectory_batch",
]
