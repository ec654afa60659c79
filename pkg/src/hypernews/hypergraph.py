"""Attributed hypergraphs of users (nodes) and news items (hyperedges).

Incidence is stored edge-major: one sorted, unique ``int64`` array of node
indices per hyperedge. The normalized node-edge-node propagation operator is
factored as ``S = B diag(w) C`` with ``B = Dv^-1/2 H`` and
``C = De^-1 H^T Dv^-1/2`` so that both ``S @ Z`` and its derivative with
respect to the edge weights stay sparse.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EmptyHyperedge, IndexOutOfRange, ShapeMismatch


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_incidence(edge_node_lists: Sequence[Sequence[int]], node_count: int) -> list[np.ndarray]:
    """Validate and canonicalize per-edge node lists.

    Duplicates inside a list are collapsed; the result is sorted.
    """
    edges = []
    for j, nodes in enumerate(edge_node_lists):
        arr = np.unique(np.asarray(list(nodes), dtype=np.int64))
        if arr.size == 0:
            raise EmptyHyperedge(f"hyperedge {j} has no incident nodes")
        if arr[0] < 0 or arr[-1] >= node_count:
            bad = arr[(arr < 0) | (arr >= node_count)][0]
            raise IndexOutOfRange(f"hyperedge {j} references node {bad} (node_count={node_count})")
        edges.append(_frozen(arr))
    return edges


def incidence_matrix(edges: Sequence[np.ndarray], node_count: int) -> sp.csc_matrix:
    """Binary m x t incidence matrix H in CSC layout (columns are edges)."""
    indptr = np.zeros(len(edges) + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(e) for e in edges])
    indices = np.concatenate(edges) if edges else np.zeros(0, dtype=np.int64)
    data = np.ones(indices.size, dtype=np.float64)
    return sp.csc_matrix((data, indices, indptr), shape=(node_count, len(edges)))


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """Users as nodes, news items as hyperedges.

    ``edge_labels`` uses -1 for unlabeled edges. ``incidence_times``, when
    present, holds one array per edge aligned with ``edges[j]`` (seconds since
    the item's publication).
    """

    node_count: int
    edges: list
    node_attrs: np.ndarray
    edge_texts: list
    edge_labels: Optional[np.ndarray] = None
    incidence_times: Optional[list] = None
    node_ids: Optional[list] = None
    edge_ids: Optional[list] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        m = self.node_count
        edges = build_incidence(self.edges, m)
        object.__setattr__(self, "edges", edges)
        X = np.array(self.node_attrs, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != m:
            raise DimensionMismatch(f"node_attrs must have {m} rows, got shape {X.shape}")
        object.__setattr__(self, "node_attrs", _frozen(X))
        t = len(edges)
        if len(self.edge_texts) != t:
            raise DimensionMismatch(f"expected {t} edge texts, got {len(self.edge_texts)}")
        object.__setattr__(self, "edge_texts", list(self.edge_texts))
        if self.edge_labels is not None:
            y = np.asarray(self.edge_labels, dtype=np.int64).copy()
            if y.shape != (t,):
                raise DimensionMismatch(f"expected {t} labels, got shape {y.shape}")
            if not np.all((y == 0) | (y == 1) | (y == -1)):
                raise DimensionMismatch("labels must be 0, 1 or -1 (unlabeled)")
            object.__setattr__(self, "edge_labels", _frozen(y))
        if self.incidence_times is not None:
            times = []
            for j, (nodes, raw) in enumerate(zip(self.edges, self.incidence_times)):
                ts = np.asarray(raw, dtype=np.float64)
                if ts.shape != nodes.shape:
                    raise DimensionMismatch(f"hyperedge {j}: {ts.size} timestamps for {nodes.size} incidences")
                if np.any(ts < 0) or not np.all(np.isfinite(ts)):
                    raise DimensionMismatch(f"hyperedge {j}: timestamps must be finite and >= 0")
                times.append(_frozen(ts.copy()))
            if len(times) != t:
                raise DimensionMismatch(f"expected timestamps for {t} edges, got {len(times)}")
            object.__setattr__(self, "incidence_times", times)
        if self.node_ids is None:
            object.__setattr__(self, "node_ids", [f"u{i}" for i in range(m)])
        elif len(self.node_ids) != m:
            raise DimensionMismatch("node_ids length differs from node_count")
        if self.edge_ids is None:
            object.__setattr__(self, "edge_ids", [f"e{j}" for j in range(t)])
        elif len(self.edge_ids) != t:
            raise DimensionMismatch("edge_ids length differs from edge count")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def attr_dim(self) -> int:
        return self.node_attrs.shape[1]

    @property
    def has_labels(self) -> bool:
        return self.edge_labels is not None and bool(np.any(self.edge_labels >= 0))

    @property
    def incidence(self) -> sp.csc_matrix:
        if "H" not in self._cache:
            self._cache["H"] = incidence_matrix(self.edges, self.node_count)
        return self._cache["H"]

    def isolated_nodes(self) -> np.ndarray:
        return np.flatnonzero(node_degrees(self.edges, self.node_count) == 0)

    def incidence_time(self, node: int, edge: int) -> float:
        if self.incidence_times is None:
            raise KeyError("hypergraph carries no timestamps")
        k = np.searchsorted(self.edges[edge], node)
        if k >= len(self.edges[edge]) or self.edges[edge][k] != node:
            raise KeyError((node, edge))
        return float(self.incidence_times[edge][k])

    def replace(self, **changes) -> "Hypergraph":
        fields = dict(
            node_count=self.node_count,
            edges=self.edges,
            node_attrs=self.node_attrs,
            edge_texts=self.edge_texts,
            edge_labels=self.edge_labels,
            incidence_times=self.incidence_times,
            node_ids=self.node_ids,
            edge_ids=self.edge_ids,
        )
        fields.update(changes)
        return Hypergraph(**fields)

    def permute_edges(self, order: Sequence[int]) -> "Hypergraph":
        order = list(order)
        return self.replace(
            edges=[self.edges[j] for j in order],
            edge_texts=[self.edge_texts[j] for j in order],
            edge_labels=None if self.edge_labels is None else self.edge_labels[order],
            incidence_times=None if self.incidence_times is None else [self.incidence_times[j] for j in order],
            edge_ids=[self.edge_ids[j] for j in order],
        )

    def permute_nodes(self, perm: Sequence[int]) -> "Hypergraph":
        """Relabel nodes so that old node ``perm[i]`` becomes new node ``i``."""
        perm = np.asarray(perm, dtype=np.int64)
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        edges, times = [], []
        for j, nodes in enumerate(self.edges):
            new = inverse[nodes]
            order = np.argsort(new, kind="stable")
            edges.append(new[order])
            if self.incidence_times is not None:
                times.append(self.incidence_times[j][order])
        return self.replace(
            edges=edges,
            node_attrs=self.node_attrs[perm],
            incidence_times=times if self.incidence_times is not None else None,
            node_ids=[self.node_ids[i] for i in perm],
        )

    def same_as(self, other: "Hypergraph") -> bool:
        """Exact structural and value equality."""
        if self.node_count != other.node_count or self.edge_count != other.edge_count:
            return False
        if any(not np.array_equal(a, b) for a, b in zip(self.edges, other.edges)):
            return False
        if not np.array_equal(self.node_attrs, other.node_attrs):
            return False
        if self.edge_texts != other.edge_texts or self.node_ids != other.node_ids or self.edge_ids != other.edge_ids:
            return False
        if (self.edge_labels is None) != (other.edge_labels is None):
            return False
        if self.edge_labels is not None and not np.array_equal(self.edge_labels, other.edge_labels):
            return False
        if (self.incidence_times is None) != (other.incidence_times is None):
            return False
        if self.incidence_times is not None:
            return all(np.array_equal(a, b) for a, b in zip(self.incidence_times, other.incidence_times))
        return True


def node_degrees(edges: Sequence[np.ndarray], node_count: int) -> np.ndarray:
    """D_v as a vector: number of hyperedges each node lies on."""
    if not edges:
        return np.zeros(node_count)
    return np.bincount(np.concatenate(edges), minlength=node_count).astype(np.float64)


def edge_degrees(edges: Sequence[np.ndarray]) -> np.ndarray:
    """D_e as a vector: number of nodes on each hyperedge."""
    return np.array([len(e) for e in edges], dtype=np.float64)


class PropagationOperator:
    """``S = Dv^-1/2 H W De^-1 H^T Dv^-1/2`` held in factored sparse form.

    Isolated nodes get a zero entry in ``Dv^-1/2``. Edge degrees are guarded
    as ``max(De, epsilon)``.
    """

    def __init__(self, edges, node_count, edge_weights=None, epsilon=1e-12):
        t = len(edges)
        if edge_weights is None:
            edge_weights = np.ones(t)
        w = np.asarray(edge_weights, dtype=np.float64)
        if w.shape != (t,):
            raise ShapeMismatch(f"edge_weights must have length {t}, got shape {w.shape}")
        if np.any(w < 0):
            raise ValueError("edge weights must be non-negative")
        if not epsilon > 0:
            raise ValueError("epsilon must be positive")
        self.node_count = node_count
        self.edge_count = t
        self.epsilon = float(epsilon)
        self.edge_weights = _frozen(w.copy())

        dv = node_degrees(edges, node_count)
        de = edge_degrees(edges)
        dv_isqrt = np.zeros_like(dv)
        nz = dv > 0
        dv_isqrt[nz] = 1.0 / np.sqrt(dv[nz])
        de_inv = 1.0 / np.maximum(de, self.epsilon)

        H = incidence_matrix(edges, node_count)
        self.node_scale = _frozen(dv_isqrt)
        self.edge_scale = _frozen(de_inv)
        # B: m x t, C: t x m
        self.B = sp.csr_matrix(sp.diags(dv_isqrt) @ H)
        self.C = sp.csr_matrix(sp.diags(de_inv) @ H.T @ sp.diags(dv_isqrt))

    @classmethod
    def from_hypergraph(cls, hg: Hypergraph, edge_weights=None, epsilon=1e-12):
        iso = hg.isolated_nodes()
        if iso.size:
            shown = ", ".join(str(hg.node_ids[i]) for i in iso[:10])
            more = "" if iso.size <= 10 else f" (+{iso.size - 10} more)"
            warnings.warn(f"{iso.size} isolated users receive no propagation: {shown}{more}", stacklevel=2)
        return cls(hg.edges, hg.node_count, edge_weights, epsilon)

    def with_weights(self, edge_weights) -> "PropagationOperator":
        """Same structure, new edge weights (shares the sparse factors)."""
        w = np.asarray(edge_weights, dtype=np.float64)
        if w.shape != (self.edge_count,):
            raise ShapeMismatch(f"edge_weights must have length {self.edge_count}")
        clone = object.__new__(PropagationOperator)
        clone.__dict__.update(self.__dict__)
        clone.edge_weights = _frozen(w.copy())
        return clone

    @property
    def matrix(self) -> sp.csr_matrix:
        """S as an explicit sparse m x m matrix."""
        return sp.csr_matrix(self.B @ sp.diags(self.edge_weights) @ self.C)

    def apply(self, Z: np.ndarray, edge_weights=None) -> np.ndarray:
        w = self.edge_weights if edge_weights is None else edge_weights
        return self.B @ (w[:, None] * (self.C @ Z))


def propagation_operator(hg_or_edges, edge_weights=None, epsilon=1e-12, node_count=None) -> PropagationOperator:
    if isinstance(hg_or_edges, Hypergraph):
        return PropagationOperator.from_hypergraph(hg_or_edges, edge_weights, epsilon)
    if node_count is None:
        raise TypeError("node_count is required when passing raw edge lists")
    edges = build_incidence(hg_or_edges, node_count)
    return PropagationOperator(edges, node_count, edge_weights, epsilon)


def coparticipation_projection(edges: Sequence[np.ndarray]) -> set:
    """Clique expansion: ``{(u, v), u < v}`` for every pair sharing an edge."""
    pairs = set()
    for nodes in edges:
        if len(nodes) > 1:
            pairs.update(itertools.combinations(nodes.tolist(), 2))
    return pairs


def projection_density(edges: Sequence[np.ndarray]) -> tuple[int, int, float]:
    """(distinct users, projected edges, density) of the clique expansion."""
    users = np.unique(np.concatenate(edges)) if edges else np.zeros(0)
    n = users.size
    links = len(coparticipation_projection(edges))
    possible = n * (n - 1) / 2
    return n, links, (links / possible if possible else 0.0)
