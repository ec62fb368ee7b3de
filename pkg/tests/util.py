"""Shared test helpers: finite differences and random fixtures."""

import numpy as np

from topoalign import LabeledPointCloud, Topic, TopicLibrary


def central_diff_grad(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at x (f64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = g.reshape(-1)
    xf = x.reshape(-1)
    for k in range(xf.size):
        orig = xf[k]
        xf[k] = orig + h
        fp = f(x)
        xf[k] = orig - h
        fm = f(x)
        xf[k] = orig
        flat[k] = (fp - fm) / (2.0 * h)
    return g


def rel_err(approx, exact):
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    denom = max(np.linalg.norm(exact), 1e-12)
    return np.linalg.norm(approx - exact) / denom


def random_cloud(rng, n, d, ensure_both_labels=False):
    pts = rng.normal(size=(n, d))
    labels = rng.integers(0, 2, size=n)
    if ensure_both_labels and n >= 2:
        labels[0] = 0
        labels[1] = 1
    return LabeledPointCloud(points=pts, labels=labels, ids=[f"p{i}" for i in range(n)])


def make_library(vectors, centroids=None, counts=None):
    """Minimal TopicLibrary from {topic_id: u_vector}."""
    dim_s = len(next(iter(vectors.values())))
    topics = []
    for tid, u in vectors.items():
        cen = centroids[tid] if centroids else np.zeros(dim_s)
        cnt = counts[tid] if counts else 100
        topics.append(Topic(topic_id=tid, name=f"t{tid}", centroid=cen, u=np.asarray(u, float), member_count=cnt))
    return TopicLibrary(K=len(topics), dim_s=dim_s, topics=topics)
