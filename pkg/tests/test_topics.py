import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from topoalign import (
    DimMismatchError,
    EmptyTemplateSetError,
    LabelerUnavailableError,
    TemplatePair,
    TooFewPointsError,
    Topic,
    TopicLibrary,
    UnknownTopicError,
    ValidationError,
    assign_topic,
    build_topic_vector,
    default_template_pairs,
    kmeans_cluster,
    label_clusters,
    merge_small_topics,
)
from topoalign.topics import (
    HttpLabelerClient,
    StaticLabeler,
    dumps_library,
    loads_library,
    read_library,
    write_library,
)


def naive_lloyd(X, k, rng, iters=100):
    """Random-init Lloyd oracle (no k-means++), for inertia comparisons."""
    centroids = X[rng.choice(len(X), size=k, replace=False)].copy()
    for _ in range(iters):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign = d2.argmin(axis=1)
        for c in range(k):
            members = X[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.min(axis=1).sum()


class TestKmeans:
    def test_k_equals_n_gives_zero_inertia(self):
        rng = np.random.default_rng(211)
        X = rng.normal(size=(8, 3))
        history = []
        assign, centroids = kmeans_cluster(X, 8, seed=0, history=history)
        assert sorted(assign.tolist()) == sorted(range(8))
        assert history[-1] == pytest.approx(0.0, abs=1e-18)

    def test_two_separated_blobs(self):
        rng = np.random.default_rng(223)
        blob_a = rng.normal(size=(30, 2)) + [0.0, 0.0]
        blob_b = rng.normal(size=(30, 2)) + [50.0, 50.0]
        X = np.vstack([blob_a, blob_b])
        assign, _ = kmeans_cluster(X, 2, seed=1)
        first, second = set(assign[:30].tolist()), set(assign[30:].tolist())
        assert len(first) == 1 and len(second) == 1 and first != second

    def test_inertia_never_increases(self):
        rng = np.random.default_rng(227)
        for seed in range(20):
            X = rng.normal(size=(100, 4))
            history = []
            kmeans_cluster(X, 6, seed=seed, history=history)
            for a, b in zip(history, history[1:]):
                assert b <= a + 1e-9

    def test_beats_worst_random_restart_oracle(self):
        rng = np.random.default_rng(229)
        X = rng.normal(size=(200, 3))
        history = []
        kmeans_cluster(X, 5, seed=7, history=history)
        ours = history[-1]
        oracle_rng = np.random.default_rng(12345)
        worst = max(naive_lloyd(X, 5, oracle_rng) for _ in range(20))
        assert ours <= worst + 1e-9

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(233)
        X = rng.normal(size=(60, 5))
        a1, c1 = kmeans_cluster(X, 4, seed=9)
        a2, c2 = kmeans_cluster(X, 4, seed=9)
        assert np.array_equal(a1, a2)
        assert np.array_equal(c1, c2)

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            kmeans_cluster(np.zeros((3, 2)), 4, seed=0)
        with pytest.raises(TooFewPointsError):
            kmeans_cluster(np.zeros((3, 2)), 0, seed=0)


class TestBuildTopicVector:
    def test_single_pair(self):
        u = build_topic_vector([([1.0, 1.0], [0.0, 1.0])])
        assert np.array_equal(u, [1.0, 0.0])

    def test_swapped_pairs_cancel(self):
        a, b = np.array([2.0, -1.0]), np.array([0.5, 3.0])
        u = build_topic_vector([(a, b), (b, a)])
        assert np.allclose(u, 0.0, atol=1e-15)

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(239)
        pairs = [(rng.normal(size=6), rng.normal(size=6)) for _ in range(4)]
        u = build_topic_vector(pairs)
        for c in range(6):
            expected = sum(p[c] - n[c] for p, n in pairs) / 4.0
            assert abs(u[c] - expected) < 1e-9

    def test_order_invariance(self):
        rng = np.random.default_rng(241)
        pairs = [(rng.normal(size=4), rng.normal(size=4)) for _ in range(5)]
        assert np.allclose(
            build_topic_vector(pairs), build_topic_vector(pairs[::-1]), atol=1e-12
        )

    def test_empty_raises(self):
        with pytest.raises(EmptyTemplateSetError):
            build_topic_vector([])


def library_fixture(counts):
    rng = np.random.default_rng(sum(counts))
    topics = [
        Topic(
            topic_id=i,
            name=f"topic-{i}",
            centroid=rng.normal(size=3),
            u=rng.normal(size=3),
            member_count=c,
        )
        for i, c in enumerate(counts)
    ]
    return TopicLibrary(K=len(counts), dim_s=3, topics=topics, seed=4)


class TestMergeSmallTopics:
    def test_unchanged_when_all_large(self):
        lib = library_fixture([60, 70, 80])
        merged = merge_small_topics(lib, 50)
        assert merged.other_topic_id == -1
        assert [t.topic_id for t in merged.topics] == [0, 1, 2]
        assert [t.member_count for t in merged.topics] == [60, 70, 80]

    def test_weighted_mean_example(self):
        topics = [
            Topic(0, "a", np.zeros(2), np.array([1.0, 0.0]), 10),
            Topic(1, "b", np.zeros(2), np.array([0.0, 1.0]), 30),
            Topic(2, "big", np.zeros(2), np.array([5.0, 5.0]), 100),
        ]
        lib = TopicLibrary(K=3, dim_s=2, topics=topics)
        merged = merge_small_topics(lib, 50)
        other = merged.topic(merged.other_topic_id)
        assert np.allclose(other.u, [0.25, 0.75], atol=1e-12)
        assert other.member_count == 40
        assert other.name == "other"

    def test_everything_below_threshold(self):
        lib = library_fixture([5, 7, 3])
        merged = merge_small_topics(lib, 50)
        assert len(merged.topics) == 1
        assert merged.topics[0].member_count == 15
        assert merged.topics[0].topic_id == merged.other_topic_id

    def test_conservation_and_floor(self):
        lib = library_fixture([3, 120, 49, 50, 7])
        merged = merge_small_topics(lib, 50)
        assert sum(t.member_count for t in merged.topics) == sum(
            t.member_count for t in lib.topics
        )
        merged.validate_members(50)

    def test_min_members_validated(self):
        with pytest.raises(ValidationError):
            merge_small_topics(library_fixture([10]), 0)


class TestAssignTopic:
    def test_exact_centroid(self):
        lib = library_fixture([60, 60, 60])
        for t in lib.topics:
            assert assign_topic(t.centroid, lib) == t.topic_id

    def test_tie_breaks_to_lower_id(self):
        topics = [
            Topic(3, "hi", np.array([1.0, 0.0]), np.zeros(2), 60),
            Topic(8, "lo", np.array([-1.0, 0.0]), np.zeros(2), 60),
        ]
        lib = TopicLibrary(K=2, dim_s=2, topics=topics)
        assert assign_topic(np.zeros(2), lib) == 3

    def test_matches_linear_scan_oracle(self):
        rng = np.random.default_rng(251)
        lib = library_fixture([60] * 5)
        cents = [t.centroid for t in lib.topics]
        for _ in range(1000):
            q = rng.normal(size=3)
            best = min(
                range(5), key=lambda i: (float(np.sum((cents[i] - q) ** 2)), i)
            )
            assert assign_topic(q, lib) == lib.topics[best].topic_id

    def test_dim_mismatch(self):
        lib = library_fixture([60])
        with pytest.raises(DimMismatchError):
            assign_topic(np.zeros(7), lib)

    def test_unknown_topic_lookup(self):
        lib = library_fixture([60])
        with pytest.raises(UnknownTopicError):
            lib.topic_vector(99)


class TestLabeling:
    def test_offline_mapping(self):
        names, warn = label_clusters(
            np.zeros((2, 3)), [["p"], ["q"]], StaticLabeler({0: "code", 1: "health"})
        )
        assert names == ["code", "health"]
        assert not warn

    def test_unreachable_falls_back(self):
        class Down:
            def label(self, cid, prompts):
                raise LabelerUnavailableError("down")

        names, warn = label_clusters(np.zeros((3, 2)), [[], [], []], Down())
        assert names == ["cluster-0", "cluster-1", "cluster-2"]
        assert warn

    def test_invalid_name_falls_back(self):
        class Wordy:
            def label(self, cid, prompts):
                return "way too many words in this label" if cid == 0 else "fine"

        names, warn = label_clusters(np.zeros((2, 2)), [[], []], Wordy())
        assert names == ["cluster-0", "fine"]
        assert warn

    def test_sample_clamped_to_cluster_size(self):
        seen = {}

        class Recorder:
            def label(self, cid, prompts):
                seen[cid] = list(prompts)
                return "ok"

        prompts = [[f"p{i}" for i in range(5)], [f"q{i}" for i in range(40)]]
        label_clusters(np.zeros((2, 2)), prompts, Recorder(), m=32, seed=0)
        assert len(seen[0]) == 5
        assert len(seen[1]) == 32

    def test_http_client_round_trip(self):
        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = json.loads(self.rfile.read(length))
                name = f"group {body['cluster_id']}"
                payload = json.dumps({"name": name}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def log_message(self, *args):
                pass

        server = HTTPServer(("127.0.0.1", 0), Handler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_port}/label"
            client = HttpLabelerClient(url, token="secret")
            assert client.label(4, ["a", "b"]) == "group 4"
        finally:
            server.shutdown()

    def test_http_client_unreachable(self):
        client = HttpLabelerClient("http://127.0.0.1:1/label", token="x", timeout=0.2)
        with pytest.raises(LabelerUnavailableError):
            client.label(0, [])


class TestTemplates:
    def test_default_pairs_load(self):
        pairs = default_template_pairs()
        assert len(pairs) == 4
        pos, neg = pairs[0].instantiate("Python programming")
        assert "Python programming" in pos and "Python programming" in neg
        assert "{t}" not in pos

    def test_slot_validation(self):
        with pytest.raises(ValidationError):
            TemplatePair("no slot here", "also none")
        with pytest.raises(ValidationError):
            TemplatePair("{t} and {t}", "one {t}")


class TestLibraryIO:
    def test_round_trip_deep_equal(self, tmp_path):
        lib = merge_small_topics(library_fixture([60, 10, 80, 5]), 50)
        path = tmp_path / "lib.txt"
        write_library(lib, path)
        back = read_library(path)
        assert back.K == lib.K
        assert back.dim_s == lib.dim_s
        assert back.other_topic_id == lib.other_topic_id
        assert back.seed == lib.seed
        assert back.warnings == lib.warnings
        assert len(back.topics) == len(lib.topics)
        for a, b in zip(back.topics, lib.topics):
            assert a.topic_id == b.topic_id
            assert a.name == b.name
            assert a.member_count == b.member_count
            # values survive at the printed 9-significant-digit precision
            assert np.allclose(a.centroid, b.centroid, rtol=1e-8, atol=1e-12)
            assert np.allclose(a.u, b.u, rtol=1e-8, atol=1e-12)

    def test_rewrite_is_byte_identical(self, tmp_path):
        lib = library_fixture([60, 51, 70])
        text = dumps_library(lib)
        again = dumps_library(loads_library(text))
        assert again == text

    def test_name_with_spaces_survives(self):
        topics = [Topic(0, "three word name", np.zeros(2), np.zeros(2), 60)]
        lib = TopicLibrary(K=1, dim_s=2, topics=topics)
        assert loads_library(dumps_library(lib)).topics[0].name == "three word name"

    def test_bad_file_rejected(self):
        with pytest.raises(ValidationError):
            loads_library("not a library\n")
