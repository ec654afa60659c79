import numpy as np
import pytest

from hypernews.hypergraph import Hypergraph


def random_edges(rng, m, t, max_size=None):
    max_size = max_size or m
    edges = []
    for _ in range(t):
        k = int(rng.integers(1, min(m, max_size) + 1))
        edges.append(np.sort(rng.choice(m, size=k, replace=False)))
    return edges


def dense_incidence(edges, m):
    H = np.zeros((m, len(edges)))
    for j, e in enumerate(edges):
        H[list(e), j] = 1.0
    return H


def dense_operator(edges, m, w, eps=1e-12):
    """Explicit five-matrix product with the same guards as the library."""
    H = dense_incidence(edges, m)
    dv = H.sum(axis=1)
    dv_isqrt = np.array([1 / np.sqrt(d) if d > 0 else 0.0 for d in dv])
    de = H.sum(axis=0)
    Dv = np.diag(dv_isqrt)
    De = np.diag(1.0 / np.maximum(de, eps))
    return Dv @ H @ np.diag(w) @ De @ H.T @ Dv


def toy_hypergraph(m=6, t=3, attr_dim=3, seed=0, labels=None):
    rng = np.random.default_rng(seed)
    edges = [[0, 1, 2], [2, 3], [3, 4, 5]][:t] if (m, t) == (6, 3) else random_edges(rng, m, t)
    labels = [0, 1, 0][:t] if labels is None and t == 3 else labels
    return Hypergraph(
        node_count=m,
        edges=edges,
        node_attrs=rng.normal(size=(m, attr_dim)),
        edge_texts=[f"item {j} words here" for j in range(t)],
        edge_labels=labels,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
