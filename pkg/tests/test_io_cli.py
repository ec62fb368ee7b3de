import json

import numpy as np
import pytest

from topoalign import (
    BadMagicError,
    LabelOutOfRangeError,
    LabeledPointCloud,
    MalformedRecordError,
    PreferenceBatch,
    TrajectoryBatch,
    TruncatedPayloadError,
    init_projection,
)
from topoalign.cli import main
from topoalign.formatting import format_g9, json9_dumps
from topoalign.io import (
    load_run_config,
    read_point_cloud,
    read_preference_batch,
    read_projection,
    read_scores,
    read_trajectory_batch,
    write_point_cloud,
    write_preference_batch,
    write_projection,
    write_trajectory_batch,
)

from util import random_cloud


class TestFormatting:
    def test_nine_significant_digits(self):
        assert format_g9(0.2) == "0.2"
        assert format_g9(1.0 / 3.0) == "0.333333333"
        assert format_g9(123456789012.0) == "1.23456789e+11"

    def test_idempotent_round_trip(self):
        rng = np.random.default_rng(401)
        for _ in range(200):
            x = float(rng.normal() * 10.0 ** float(rng.integers(-8, 8)))
            s = format_g9(x)
            assert format_g9(float(s)) == s

    def test_f32_exact_round_trip(self):
        rng = np.random.default_rng(409)
        for _ in range(200):
            x = np.float32(rng.normal())
            assert np.float32(float(format_g9(float(x)))) == x

    def test_json9_renders_arrays_and_dicts(self):
        doc = {"a": [1, 2.5, True, None], "b": np.array([0.1, 0.2])}
        text = json9_dumps(doc)
        assert json.loads(text) == {"a": [1, 2.5, True, None], "b": [0.1, 0.2]}


class TestPointCloudFormats:
    def test_binary_round_trip(self, tmp_path):
        rng = np.random.default_rng(419)
        cloud = random_cloud(rng, 13, 5, ensure_both_labels=True)
        path = tmp_path / "c.bin"
        write_point_cloud(cloud, path, "bin")
        back = read_point_cloud(path)
        assert back.ids == cloud.ids
        assert np.array_equal(back.labels, cloud.labels)
        assert np.array_equal(back.points, cloud.points.astype(np.float32).astype(np.float64))

    def test_jsonl_round_trip(self, tmp_path):
        rng = np.random.default_rng(421)
        cloud = random_cloud(rng, 9, 4)
        path = tmp_path / "c.jsonl"
        write_point_cloud(cloud, path, "jsonl")
        back = read_point_cloud(path)
        assert back.ids == cloud.ids
        assert np.array_equal(back.labels, cloud.labels)
        assert np.array_equal(back.points, cloud.points.astype(np.float32).astype(np.float64))

    def test_cross_format_identical(self, tmp_path):
        rng = np.random.default_rng(431)
        cloud = random_cloud(rng, 17, 6)
        b, j = tmp_path / "c.bin", tmp_path / "c.jsonl"
        write_point_cloud(cloud, b, "bin")
        write_point_cloud(cloud, j, "jsonl")
        cb, cj = read_point_cloud(b), read_point_cloud(j)
        assert cb.ids == cj.ids
        assert np.array_equal(cb.labels, cj.labels)
        assert np.array_equal(cb.points, cj.points)

    def test_truncated_binary(self, tmp_path):
        rng = np.random.default_rng(433)
        cloud = random_cloud(rng, 8, 3)
        path = tmp_path / "c.bin"
        write_point_cloud(cloud, path, "bin")
        blob = path.read_bytes()
        for cut in (6, 20, 30, len(blob) - 2):
            trunc = tmp_path / f"t{cut}.bin"
            trunc.write_bytes(blob[:cut])
            with pytest.raises(TruncatedPayloadError):
                read_point_cloud(trunc)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(BadMagicError):
            read_point_cloud(path, "bin")

    def test_label_out_of_range_binary(self, tmp_path):
        rng = np.random.default_rng(439)
        cloud = random_cloud(rng, 4, 2)
        path = tmp_path / "c.bin"
        write_point_cloud(cloud, path, "bin")
        blob = bytearray(path.read_bytes())
        blob[24] = 7  # first label byte sits right after the 24-byte header
        bad = tmp_path / "bad.bin"
        bad.write_bytes(bytes(blob))
        with pytest.raises(LabelOutOfRangeError):
            read_point_cloud(bad)

    def test_malformed_jsonl(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": "a", "label": 0, "vec": [1.0]}\nnot json\n')
        with pytest.raises(MalformedRecordError):
            read_point_cloud(path, "jsonl")
        path.write_text('{"id": "a", "label": 3, "vec": [1.0]}\n')
        with pytest.raises(LabelOutOfRangeError):
            read_point_cloud(path, "jsonl")


class TestBatchAndScoreFiles:
    def test_trajectory_batch_round_trip(self, tmp_path):
        rng = np.random.default_rng(443)
        batch = TrajectoryBatch(
            h_prompt=rng.normal(size=(3, 4)).astype(np.float32),
            h_model=rng.normal(size=(3, 4)).astype(np.float32),
            h_gold=rng.normal(size=(3, 4)).astype(np.float32),
            ids=["a", "b", "c"],
        )
        path = tmp_path / "b.jsonl"
        write_trajectory_batch(batch, path)
        back = read_trajectory_batch(path)
        assert back.ids == batch.ids
        assert np.array_equal(back.h_prompt, batch.h_prompt)
        assert np.array_equal(back.h_model, batch.h_model)
        assert np.array_equal(back.h_gold, batch.h_gold)

    def test_preference_batch_round_trip(self, tmp_path):
        rng = np.random.default_rng(449)
        batch = PreferenceBatch(
            h_chosen=rng.normal(size=(2, 3)).astype(np.float32),
            h_rejected=rng.normal(size=(2, 3)).astype(np.float32),
            topic_ids=[4, 7],
            ids=["x", "y"],
        )
        path = tmp_path / "p.jsonl"
        write_preference_batch(batch, path)
        back = read_preference_batch(path)
        assert back.topic_ids == [4, 7]
        assert np.array_equal(back.h_chosen, batch.h_chosen)

    def test_scores_reader(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("id,rm,help\na,1.5,2.5\nb,-0.25,0\n")
        scores = read_scores(path)
        assert scores == {"a": (1.5, 2.5), "b": (-0.25, 0.0)}

    def test_scores_reject_garbage(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("a,1.5\n")
        with pytest.raises(MalformedRecordError):
            read_scores(path)

    def test_projection_round_trip(self, tmp_path):
        proj = init_projection(5, 3, seed=21)
        path = tmp_path / "proj.json"
        write_projection(proj, path)
        back = read_projection(path)
        assert back.seed == 21
        assert back.values.shape == (5, 3)
        assert np.allclose(back.values, proj.values, rtol=1e-8, atol=1e-12)

    def test_run_config(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps(
                {
                    "lambda_topo": 0.4,
                    "seed": 3,
                    "scheduler": {"gamma": 0.9, "warmup_steps": 2},
                }
            )
        )
        cfg = load_run_config(path)
        assert cfg.lambda_topo == 0.4
        assert cfg.scheduler.gamma == 0.9
        assert cfg.scheduler.alpha == 0.5
        assert cfg.layer_tag == "-4"


def run_cli(*argv):
    return main(list(argv))


class TestCli:
    def test_bridges_four_point_example(self, tmp_path, capsys):
        cloud = LabeledPointCloud(
            points=np.array([[0.0], [1.0], [10.0], [11.0]]),
            labels=[0, 0, 1, 1],
            ids=["a", "b", "c", "d"],
        )
        inp = tmp_path / "cloud.bin"
        out = tmp_path / "bridges.jsonl"
        write_point_cloud(cloud, inp, "bin")
        assert run_cli("bridges", "--input", str(inp), "--output", str(out)) == 0
        records = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(records) == 1
        assert records[0]["source_id"] == "b"
        assert records[0]["target_id"] == "c"
        assert records[0]["weight"] == 9.0

    def test_ttl_perfect_alignment(self, tmp_path, capsys):
        # pair clusters on a line: the only cross-label death edges are the
        # per-pair ones (inter-cluster hops go prompt->prompt, strictly
        # shorter than any cross-cluster prompt->gold edge)
        B, d = 4, 2
        prompts = np.array([[10.0 * i, 0.0] for i in range(B)])
        gold = prompts + np.array([0.0, 0.001])
        batch = TrajectoryBatch(prompts, gold.copy(), gold, ids=[f"e{i}" for i in range(B)])
        bpath = tmp_path / "batch.jsonl"
        out = tmp_path / "ttl.json"
        write_trajectory_batch(batch, bpath)
        assert run_cli("ttl", "--batch", str(bpath), "--output", str(out), "--ce", "2.0") == 0
        report = json.loads(out.read_text())
        assert report["loss"] == pytest.approx(0.0, abs=1e-9)
        assert report["combined"] == pytest.approx(2.0, abs=1e-9)
        assert capsys.readouterr().out.startswith("ttl_loss ")

    def test_tpo_and_topo_tpo(self, tmp_path):
        from topoalign import Topic, TopicLibrary, write_library

        rng = np.random.default_rng(461)
        d, d_s = 5, 3
        batch = PreferenceBatch(
            h_chosen=rng.normal(size=(3, d)),
            h_rejected=rng.normal(size=(3, d)),
            topic_ids=[0, 1, 0],
            ids=["a", "b", "c"],
        )
        bpath = tmp_path / "pref.jsonl"
        write_preference_batch(batch, bpath)
        topics = [
            Topic(0, "zero", rng.normal(size=d_s), rng.normal(size=d_s), 60),
            Topic(1, "one", rng.normal(size=d_s), rng.normal(size=d_s), 60),
        ]
        lpath = tmp_path / "lib.txt"
        write_library(TopicLibrary(K=2, dim_s=d_s, topics=topics), lpath)
        out = tmp_path / "tpo.json"
        assert (
            run_cli(
                "tpo",
                "--batch", str(bpath),
                "--library", str(lpath),
                "--output", str(out),
                "--proj-seed", "5",
                "--dpo", "0.7",
                "--lambda-dyn", "0.5",
            )
            == 0
        )
        report = json.loads(out.read_text())
        assert 0.0 <= report["loss"] <= 2.0
        assert report["combined"] == pytest.approx(0.7 + 0.5 * report["loss"], rel=1e-6)

        out2 = tmp_path / "topo.json"
        assert (
            run_cli(
                "topo-tpo",
                "--batch", str(bpath),
                "--library", str(lpath),
                "--output", str(out2),
                "--proj-seed", "5",
            )
            == 0
        )
        report2 = json.loads(out2.read_text())
        assert report2["bridge_count"] >= 1

    def test_schedule_simulate(self, tmp_path):
        trace = tmp_path / "trace.csv"
        lines = ["step,dpo,tpo"] + [f"{i},0.6,0.3" for i in range(500)]
        trace.write_text("".join(l + "\n" for l in lines))
        out = tmp_path / "lambda.csv"
        assert (
            run_cli(
                "schedule", "simulate",
                "--input", str(trace),
                "--output", str(out),
                "--warmup", "0",
            )
            == 0
        )
        rows = out.read_text().splitlines()
        assert rows[0] == "step,ema_dpo,ema_tpo,lambda_dyn"
        import math

        final = float(rows[-1].split(",")[-1])
        expected = 0.5 * math.tanh((0.6 + 1e-6) / (0.3 + 1e-6))
        assert final == pytest.approx(expected, abs=1e-9)

    def test_oracle_check(self, tmp_path, capsys):
        assert (
            run_cli(
                "oracle-check", "--n", "16", "--d", "4", "--trials", "5", "--seed", "7"
            )
            == 0
        )
        assert "5/5 Kruskal-equivalence passes" in capsys.readouterr().out

    def test_analyze(self, tmp_path):
        rng = np.random.default_rng(463)
        rec_path = tmp_path / "records.jsonl"
        lines = []
        for i in range(40):
            lines.append(
                json.dumps(
                    {
                        "id": f"r{i}",
                        "value": float(rng.uniform(-1, 1)),
                        "kind": "improvement_sigma",
                        "topic_id": i % 2,
                    }
                )
            )
        rec_path.write_text("".join(l + "\n" for l in lines))
        scores_a = tmp_path / "a.csv"
        scores_b = tmp_path / "b.csv"
        scores_a.write_text("".join(f"r{i},{i * 0.1},{i * 0.2}\n" for i in range(40)))
        scores_b.write_text("".join(f"r{i},{i * 0.1 + 1},{i * 0.2 + 2}\n" for i in range(40)))
        cloud = random_cloud(rng, 10, 3, ensure_both_labels=True)
        cpath = tmp_path / "cloud.bin"
        write_point_cloud(cloud, cpath, "bin")
        out = tmp_path / "report.json"
        assert (
            run_cli(
                "analyze",
                "--records", str(rec_path),
                "--bins", "8",
                "--scores-a", str(scores_a),
                "--scores-b", str(scores_b),
                "--cloud", str(cpath),
                "--output", str(out),
            )
            == 0
        )
        report = json.loads(out.read_text())
        assert report["histograms"]["all"]["total"] == 40
        assert len(report["topic_gains"]) == 2
        for row in report["topic_gains"]:
            assert row["delta_rm"] == pytest.approx(1.0, abs=1e-6)
            assert row["delta_help"] == pytest.approx(2.0, abs=1e-6)
        assert report["bridge_stats"]["bridge_count"] >= 1

    def test_topics_build_and_assign(self, tmp_path):
        rng = np.random.default_rng(467)
        d_s = 4
        blobs = [rng.normal(size=(40, d_s)) + mu for mu in (0.0, 30.0, -30.0)]
        pts = np.vstack(blobs)
        cloud = LabeledPointCloud(
            points=pts, labels=np.zeros(len(pts), dtype=np.uint8),
            ids=[f"q{i}" for i in range(len(pts))],
        )
        emb = tmp_path / "emb.bin"
        write_point_cloud(cloud, emb, "bin")
        names = tmp_path / "names.json"
        names.write_text(json.dumps({"0": "alpha", "1": "beta", "2": "gamma"}))
        tmpl = tmp_path / "tmpl.jsonl"
        lines = []
        for cid in range(3):
            for _ in range(2):
                lines.append(
                    json.dumps(
                        {
                            "topic_id": cid,
                            "e_pos": [float(x) for x in rng.normal(size=d_s)],
                            "e_neg": [float(x) for x in rng.normal(size=d_s)],
                        }
                    )
                )
        tmpl.write_text("".join(l + "\n" for l in lines))
        lib_path = tmp_path / "lib.txt"
        assert (
            run_cli(
                "topics-build",
                "--embeddings", str(emb),
                "--k", "3",
                "--seed", "11",
                "--names", str(names),
                "--template-embeddings", str(tmpl),
                "--min-members", "10",
                "--output", str(lib_path),
            )
            == 0
        )
        from topoalign import read_library

        lib = read_library(lib_path)
        assert len(lib.topics) == 3
        assert {t.name for t in lib.topics} == {"alpha", "beta", "gamma"}
        assert sum(t.member_count for t in lib.topics) == 120

        assign_out = tmp_path / "assign.jsonl"
        assert (
            run_cli(
                "topics-assign",
                "--library", str(lib_path),
                "--embeddings", str(emb),
                "--output", str(assign_out),
            )
            == 0
        )
        rows = [json.loads(l) for l in assign_out.read_text().splitlines()]
        assert len(rows) == 120
        # blob members should agree on their topic
        first_topic = rows[0]["topic_id"]
        assert all(r["topic_id"] == first_topic for r in rows[:40])

    def test_topics_build_emit_sentences(self, tmp_path):
        rng = np.random.default_rng(479)
        cloud = LabeledPointCloud(
            points=rng.normal(size=(10, 3)),
            labels=np.zeros(10, dtype=np.uint8),
            ids=[f"q{i}" for i in range(10)],
        )
        emb = tmp_path / "emb.jsonl"
        write_point_cloud(cloud, emb, "jsonl")
        names = tmp_path / "names.json"
        names.write_text(json.dumps({"0": "alpha", "1": "beta"}))
        sentences = tmp_path / "sentences.jsonl"
        assert (
            run_cli(
                "topics-build",
                "--embeddings", str(emb),
                "--k", "2",
                "--seed", "3",
                "--names", str(names),
                "--emit-template-sentences", str(sentences),
                "--output", str(tmp_path / "unused.txt"),
            )
            == 0
        )
        rows = [json.loads(l) for l in sentences.read_text().splitlines()]
        assert len(rows) == 8  # 2 clusters x 4 default pairs
        assert any("alpha" in r["positive"] for r in rows)
        assert not (tmp_path / "unused.txt").exists()

    def test_exit_codes(self, tmp_path, capsys):
        # usage error -> 1
        assert run_cli("bridges") == 1
        # missing file -> 2
        assert (
            run_cli(
                "bridges",
                "--input", str(tmp_path / "missing.bin"),
                "--output", str(tmp_path / "out.jsonl"),
            )
            == 2
        )
        # validation error -> 1 (random baseline without seed)
        cloud = LabeledPointCloud(
            points=np.array([[0.0], [1.0]]), labels=[0, 1], ids=["a", "b"]
        )
        cpath = tmp_path / "c.bin"
        write_point_cloud(cloud, cpath, "bin")
        assert (
            run_cli(
                "bridges",
                "--input", str(cpath),
                "--output", str(tmp_path / "o.jsonl"),
                "--mode", "random",
            )
            == 1
        )
        capsys.readouterr()

    def test_unknown_subcommand_exits_one(self, capsys):
        assert run_cli("frobnicate") == 1
        capsys.readouterr()
