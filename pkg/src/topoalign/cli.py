"""Command-line surface tying the modules into batch workflows.

Every subcommand is deterministic given identical inputs, config, and
seeds; numeric output is printed with 9 significant digits.  Exit codes:
0 success, 1 validation/usage error, 2 IO/format error.
"""

import argparse
import json
import sys

import numpy as np

from . import oracles
from .analysis import (
    KIND_IMPROVEMENT,
    bridge_statistics,
    cosine_distribution,
    per_topic_gains,
)
from .backend import backend_name
from .errors import (
    FormatError,
    TopoAlignError,
    ValidationError,
)
from .formatting import format_g9, json9_dumps
from .io import (
    RunConfig,
    load_run_config,
    read_cosine_records,
    read_point_cloud,
    read_preference_batch,
    read_projection,
    read_scores,
    read_template_embeddings,
    read_trajectory_batch,
    write_projection,
)
from .losses import (
    combine_dpo,
    combine_sft,
    init_projection,
    topo_tpo_loss,
    tpo_loss,
    trajectory_cloud,
    ttl_loss,
)
from .persistence import (
    LabeledPointCloud,
    baseline_pairs,
    death_edges,
    extract_bridges,
)
from .scheduler import SchedulerConfig, simulate
from .topics import (
    HttpLabelerClient,
    StaticLabeler,
    Topic,
    TopicLibrary,
    build_topic_vector,
    default_template_pairs,
    kmeans_cluster,
    label_clusters,
    merge_small_topics,
    assign_topic,
    read_library,
    write_library,
)
from . import _kernels


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_run_config(args.config)
    return RunConfig()


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _bridge_record(cloud: LabeledPointCloud, br) -> dict:
    return {
        "source_id": cloud.ids[br.source],
        "target_id": cloud.ids[br.target],
        "source": br.source,
        "target": br.target,
        "weight": br.weight,
        "direction": [float(x) for x in br.direction],
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_bridges(args) -> int:
    cfg = _config(args)
    cloud = read_point_cloud(args.input, args.format or cfg.format)
    if args.mode == "ph":
        bridges = extract_bridges(cloud, death_edges(cloud))
    else:
        seed = args.seed if args.seed is not None else cfg.seed
        if args.mode == "random" and seed is None:
            raise ValidationError("--mode random requires --seed")
        bridges = baseline_pairs(cloud, args.mode, seed=seed)
    lines = [json9_dumps(_bridge_record(cloud, b)) for b in bridges]
    _write_text(args.output, "".join(line + "\n" for line in lines))
    print(f"wrote {len(bridges)} bridges ({args.mode})")
    return 0


def cmd_ttl(args) -> int:
    cfg = _config(args)
    batch = read_trajectory_batch(args.batch)
    cloud = trajectory_cloud(batch)
    bridges = extract_bridges(cloud, death_edges(cloud))
    res = ttl_loss(batch, bridges, want_grads=args.grads, eps=cfg.cosine_eps)
    lam = args.lambda_topo if args.lambda_topo is not None else cfg.lambda_topo
    report = {
        "loss": res.value,
        "bridge_count": res.bridge_count,
        "lambda_topo": lam,
        "per_item": [{"id": i, "cosine": c} for i, c in res.per_item],
    }
    if args.ce is not None:
        report["ce"] = args.ce
        report["combined"] = combine_sft(args.ce, res.value, lam)
    if args.grads:
        report["grads"] = {k: v for k, v in res.grads.items()}
    _write_text(args.output, json9_dumps(report) + "\n")
    print(f"ttl_loss {format_g9(res.value)} bridges {res.bridge_count}")
    return 0


def _projection_for(args, d: int, d_s: int):
    if args.projection:
        proj = read_projection(args.projection)
        if (proj.d, proj.d_s) != (d, d_s):
            raise ValidationError(
                f"projection is {proj.d}x{proj.d_s}, batch/library need {d}x{d_s}"
            )
        return proj
    if args.proj_seed is None:
        raise ValidationError("need --projection FILE or --proj-seed N")
    return init_projection(d, d_s, args.proj_seed)


def cmd_tpo(args) -> int:
    cfg = _config(args)
    batch = read_preference_batch(args.batch)
    lib = read_library(args.library)
    proj = _projection_for(args, batch.d, lib.dim_s)
    res = tpo_loss(
        batch,
        lib,
        proj,
        ln_eps=cfg.ln_eps,
        want_grads=args.grads,
        eps=cfg.cosine_eps,
        use_layer_norm=not args.no_layer_norm,
    )
    report = {
        "loss": res.value,
        "per_item": [{"id": i, "cosine": c} for i, c in res.per_item],
    }
    if args.dpo is not None:
        lam = args.lambda_dyn if args.lambda_dyn is not None else 0.0
        report["dpo"] = args.dpo
        report["lambda_dyn"] = lam
        report["combined"] = combine_dpo(args.dpo, res.value, lam)
    if args.grads:
        report["grads"] = {k: v for k, v in res.grads.items()}
    if args.save_projection:
        write_projection(proj, args.save_projection)
    _write_text(args.output, json9_dumps(report) + "\n")
    print(f"tpo_loss {format_g9(res.value)}")
    return 0


def cmd_topo_tpo(args) -> int:
    cfg = _config(args)
    batch = read_preference_batch(args.batch)
    lib = read_library(args.library)
    proj = _projection_for(args, batch.d, lib.dim_s)
    res = topo_tpo_loss(
        batch,
        lib,
        proj,
        want_grads=args.grads,
        eps=cfg.cosine_eps,
        layer_norm_cloud=args.layer_norm_cloud,
        ln_eps=cfg.ln_eps,
    )
    report = {
        "loss": res.value,
        "bridge_count": res.bridge_count,
        "per_item": [{"id": i, "cosine": c} for i, c in res.per_item],
    }
    if args.grads:
        report["grads"] = {k: v for k, v in res.grads.items()}
    if args.save_projection:
        write_projection(proj, args.save_projection)
    _write_text(args.output, json9_dumps(report) + "\n")
    print(f"topo_tpo_loss {format_g9(res.value)} bridges {res.bridge_count}")
    return 0


def _load_template_pairs(path):
    if not path:
        return default_template_pairs()
    from .topics import TemplatePair

    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return [TemplatePair(p["positive"], p["negative"]) for p in raw["pairs"]]


def cmd_topics_build(args) -> int:
    cfg = _config(args)
    cloud = read_point_cloud(args.embeddings, args.format or cfg.format)
    X = cloud.points
    if args.normalize:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        X = X / np.maximum(norms, 1e-12)
    assignments, centroids = kmeans_cluster(X, args.k, args.seed, args.max_iters)
    counts = np.bincount(assignments, minlength=args.k)

    prompt_texts = {}
    if args.prompt_texts:
        for rec in _iter_jsonl(args.prompt_texts):
            prompt_texts[str(rec["id"])] = str(rec["text"])
    per_cluster = [[] for _ in range(args.k)]
    for idx, cid in enumerate(assignments):
        pid = cloud.ids[idx]
        per_cluster[int(cid)].append(prompt_texts.get(pid, pid))

    if args.names:
        with open(args.names, "r", encoding="utf-8") as fh:
            client = StaticLabeler(json.load(fh))
    elif args.labeler_endpoint:
        client = HttpLabelerClient(args.labeler_endpoint)
    else:
        client = None
    names, warn = label_clusters(
        centroids, per_cluster, client, m=args.label_sample, seed=args.seed
    )
    if warn:
        print("warning: labeler fallback names in use", file=sys.stderr)

    if args.emit_template_sentences:
        pairs = _load_template_pairs(args.templates)
        lines = []
        for cid, name in enumerate(names):
            for pair in pairs:
                pos, neg = pair.instantiate(name)
                lines.append(
                    json9_dumps(
                        {"topic_id": cid, "name": name, "positive": pos, "negative": neg}
                    )
                )
        _write_text(
            args.emit_template_sentences, "".join(line + "\n" for line in lines)
        )
        if not args.template_embeddings:
            print(
                f"wrote {len(lines)} template sentences; encode them and re-run "
                "with --template-embeddings"
            )
            return 0

    if not args.template_embeddings:
        raise ValidationError(
            "need --template-embeddings (or --emit-template-sentences to produce "
            "the sentences to encode)"
        )
    embedded = read_template_embeddings(args.template_embeddings)
    topics = []
    for cid in range(args.k):
        u = build_topic_vector(embedded.get(cid, []))
        topics.append(
            Topic(
                topic_id=cid,
                name=names[cid],
                centroid=centroids[cid],
                u=u,
                member_count=int(counts[cid]),
            )
        )
    lib = TopicLibrary(
        K=args.k,
        dim_s=cloud.d,
        topics=topics,
        seed=args.seed,
        warnings=["labeler_fallback"] if warn else [],
    )
    if args.min_members > 0:
        lib = merge_small_topics(lib, args.min_members)
    write_library(lib, args.output)
    print(f"wrote library: {len(lib.topics)} topics, dim_s {lib.dim_s}")
    return 0


def cmd_topics_assign(args) -> int:
    cfg = _config(args)
    lib = read_library(args.library)
    cloud = read_point_cloud(args.embeddings, args.format or cfg.format)
    lines = []
    for i in range(cloud.n):
        e = cloud.points[i]
        if args.normalize:
            e = e / max(float(np.linalg.norm(e)), 1e-12)
        tid = assign_topic(e, lib)
        lines.append(
            json9_dumps({"id": cloud.ids[i], "topic_id": tid, "name": lib.topic(tid).name})
        )
    _write_text(args.output, "".join(line + "\n" for line in lines))
    print(f"assigned {cloud.n} embeddings")
    return 0


def _parse_trace(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in (line.split(",") if "," in line else line.split())]
            if len(parts) != 3:
                raise ValidationError(f"{path}:{lineno}: expected step,dpo,tpo")
            try:
                rows.append((parts[0], float(parts[1]), float(parts[2])))
            except ValueError:
                if not rows and parts[0] == "step":
                    continue  # header
                raise ValidationError(f"{path}:{lineno}: bad number in trace")
    return rows


def cmd_schedule_simulate(args) -> int:
    cfg = _config(args)
    sched = cfg.scheduler
    sched = SchedulerConfig(
        gamma=args.gamma if args.gamma is not None else sched.gamma,
        alpha=args.alpha if args.alpha is not None else sched.alpha,
        eps=args.eps if args.eps is not None else sched.eps,
        warmup_steps=args.warmup if args.warmup is not None else sched.warmup_steps,
    )
    rows = _parse_trace(args.input)
    trace = simulate([(dpo, tpo) for _, dpo, tpo in rows], sched)
    out = ["step,ema_dpo,ema_tpo,lambda_dyn"]
    for (step, _, _), state in zip(rows, trace):
        out.append(
            f"{step},{format_g9(state.ema_dpo)},{format_g9(state.ema_tpo)},"
            f"{format_g9(state.lambda_dyn)}"
        )
    _write_text(args.output, "".join(line + "\n" for line in out))
    final = trace[-1].lambda_dyn if trace else 0.0
    print(f"simulated {len(trace)} steps, final lambda_dyn {format_g9(final)}")
    return 0


def _hist_doc(hist) -> dict:
    return {
        "bins": hist.bins,
        "edges": [float(e) for e in hist.edges],
        "counts": [int(c) for c in hist.counts],
        "total": int(hist.counts.sum()),
    }


def cmd_analyze(args) -> int:
    cfg = _config(args)
    report = {}
    records = []
    if args.records:
        records = read_cosine_records(args.records)
        hists = {"all": _hist_doc(cosine_distribution(records, args.bins))}
        for kind in sorted({r.kind for r in records}):
            sub = [r for r in records if r.kind == kind]
            hists[kind] = _hist_doc(cosine_distribution(sub, args.bins))
        report["histograms"] = hists
    if args.scores_a or args.scores_b:
        if not (args.scores_a and args.scores_b and args.records):
            raise ValidationError(
                "per-topic gains need --records, --scores-a and --scores-b"
            )
        sigmas = [r for r in records if r.kind == KIND_IMPROVEMENT]
        rows = per_topic_gains(sigmas, read_scores(args.scores_a), read_scores(args.scores_b))
        report["topic_gains"] = [
            {
                "topic_id": r.topic_id,
                "mean_sigma": r.mean_sigma,
                "delta_rm": r.delta_rm,
                "delta_help": r.delta_help,
                "n": r.n,
            }
            for r in rows
        ]
    if args.cloud:
        stats = bridge_statistics(read_point_cloud(args.cloud, args.format or cfg.format))
        report["bridge_stats"] = {
            "bridge_count": stats.bridge_count,
            "length_quantiles": list(stats.length_quantiles),
            "mean_length": stats.mean_length,
            "knn": {
                "count": stats.comparison.count,
                "length_quantiles": list(stats.comparison.length_quantiles),
                "mean_length": stats.comparison.mean_length,
            },
        }
    if not report:
        raise ValidationError("nothing to analyze: pass --records and/or --cloud")
    _write_text(args.output, json9_dumps(report) + "\n")
    print(f"analyze: {len(records)} records, sections {','.join(report)}")
    return 0


def cmd_oracle_check(args) -> int:
    _kernels.warmup()
    rng = np.random.default_rng(args.seed)
    passes = 0
    for _ in range(args.trials):
        pts = rng.normal(size=(args.n, args.d))
        labels = rng.integers(0, 2, size=args.n)
        cloud = LabeledPointCloud(
            points=pts, labels=labels, ids=[f"p{i}" for i in range(args.n)]
        )
        edges = death_edges(cloud)
        oracle = oracles.kruskal_mst_edges(pts)
        ok = (
            len(edges) == args.n - 1
            and {(e.i, e.j) for e in edges} == {(i, j) for i, j, _ in oracle}
        )
        if ok:
            oracle_w = {(i, j): w for i, j, w in oracle}
            ok = all(
                abs(e.weight - oracle_w[(e.i, e.j)]) <= 1e-9 * max(1.0, e.weight)
                for e in edges
            )
        passes += int(ok)
    print(f"oracle-check: {passes}/{args.trials} Kruskal-equivalence passes")
    return 0 if passes == args.trials else 1


def _iter_jsonl(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


# ---------------------------------------------------------------------------
# parser

def build_parser() -> _Parser:
    parser = _Parser(prog="topoalign", description=__doc__)
    parser.add_argument("--config", help="run-config JSON file")
    parser.add_argument(
        "--version", action="version", version=f"topoalign 0.1.0 ({backend_name()})"
    )
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("bridges", help="extract bridges from a labeled point cloud")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=["auto", "bin", "jsonl"], default=None)
    p.add_argument(
        "--mode", choices=["ph", "random", "per_example", "knn"], default="ph"
    )
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bridges)

    p = sub.add_parser("ttl", help="trajectory topology loss over a batch file")
    p.add_argument("--batch", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--lambda-topo", type=float, default=None, dest="lambda_topo")
    p.add_argument("--ce", type=float, default=None, help="external CE loss to combine")
    p.add_argument("--grads", action="store_true")
    p.set_defaults(func=cmd_ttl)

    p = sub.add_parser("tpo", help="topic-preference loss over a batch file")
    p.add_argument("--batch", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--projection", default=None)
    p.add_argument("--proj-seed", type=int, default=None, dest="proj_seed")
    p.add_argument("--save-projection", default=None, dest="save_projection")
    p.add_argument("--dpo", type=float, default=None)
    p.add_argument("--lambda-dyn", type=float, default=None, dest="lambda_dyn")
    p.add_argument("--no-layer-norm", action="store_true", dest="no_layer_norm")
    p.add_argument("--grads", action="store_true")
    p.set_defaults(func=cmd_tpo)

    p = sub.add_parser("topo-tpo", help="fully topological preference loss")
    p.add_argument("--batch", required=True)
    p.add_argument("--library", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--projection", default=None)
    p.add_argument("--proj-seed", type=int, default=None, dest="proj_seed")
    p.add_argument("--save-projection", default=None, dest="save_projection")
    p.add_argument(
        "--layer-norm-cloud", action="store_true", dest="layer_norm_cloud"
    )
    p.add_argument("--grads", action="store_true")
    p.set_defaults(func=cmd_topo_tpo)

    p = sub.add_parser("topics-build", help="cluster embeddings into a topic library")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--max-iters", type=int, default=100, dest="max_iters")
    p.add_argument("--min-members", type=int, default=50, dest="min_members")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--format", choices=["auto", "bin", "jsonl"], default=None)
    p.add_argument("--names", default=None, help="offline {cluster_id: name} JSON map")
    p.add_argument("--labeler-endpoint", default=None, dest="labeler_endpoint")
    p.add_argument("--label-sample", type=int, default=32, dest="label_sample")
    p.add_argument("--prompt-texts", default=None, dest="prompt_texts")
    p.add_argument("--templates", default=None, help="template pair JSON file")
    p.add_argument(
        "--emit-template-sentences", default=None, dest="emit_template_sentences"
    )
    p.add_argument(
        "--template-embeddings", default=None, dest="template_embeddings"
    )
    p.set_defaults(func=cmd_topics_build)

    p = sub.add_parser("topics-assign", help="nearest-centroid topic assignment")
    p.add_argument("--library", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--format", choices=["auto", "bin", "jsonl"], default=None)
    p.set_defaults(func=cmd_topics_assign)

    p = sub.add_parser("schedule", help="dynamic-weighting utilities")
    ssub = p.add_subparsers(dest="schedule_command", metavar="ACTION")
    ps = ssub.add_parser("simulate", help="replay a loss trace into lambda_dyn")
    ps.add_argument("--input", required=True)
    ps.add_argument("--output", required=True)
    ps.add_argument("--gamma", type=float, default=None)
    ps.add_argument("--alpha", type=float, default=None)
    ps.add_argument("--eps", type=float, default=None)
    ps.add_argument("--warmup", type=int, default=None)
    ps.set_defaults(func=cmd_schedule_simulate)

    p = sub.add_parser("analyze", help="cosine distributions, topic gains, bridge stats")
    p.add_argument("--records", default=None)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--scores-a", default=None, dest="scores_a")
    p.add_argument("--scores-b", default=None, dest="scores_b")
    p.add_argument("--cloud", default=None)
    p.add_argument("--format", choices=["auto", "bin", "jsonl"], default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle-check", help="diff death edges against brute-force Kruskal")
    p.add_argument("--n", type=int, default=32)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if not hasattr(args, "func"):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TopoAlignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
