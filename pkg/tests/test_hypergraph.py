import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypernews.errors import EmptyHyperedge, IndexOutOfRange, ShapeMismatch
from hypernews.hypergraph import (
    Hypergraph,
    PropagationOperator,
    build_incidence,
    coparticipation_projection,
    edge_degrees,
    incidence_matrix,
    node_degrees,
    projection_density,
    propagation_operator,
)

from conftest import dense_incidence, dense_operator, random_edges


@st.composite
def hypergraphs(draw, max_m=12, max_t=10):
    m = draw(st.integers(1, max_m))
    t = draw(st.integers(1, max_t))
    edges = [
        draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m, unique=True))
        for _ in range(t)
    ]
    return m, [np.array(sorted(e)) for e in edges]


def H_of(edges, m):
    return incidence_matrix(build_incidence(edges, m), m).toarray()


class TestIncidence:
    def test_single_edge(self):
        assert H_of([[0, 1]], 2).tolist() == [[1], [1]]

    def test_two_edges(self):
        assert H_of([[0], [0, 1, 2]], 3).tolist() == [[1, 1], [0, 1], [0, 1]]

    def test_duplicates_collapse(self):
        assert H_of([[1, 1, 0]], 2).tolist() == [[1], [1]]
        assert build_incidence([[1, 1, 0]], 2)[0].tolist() == [0, 1]

    def test_empty_edge_rejected(self):
        with pytest.raises(EmptyHyperedge):
            build_incidence([[0], []], 2)

    @pytest.mark.parametrize("bad", [[2], [-1], [0, 5]])
    def test_out_of_range(self, bad):
        with pytest.raises(IndexOutOfRange):
            build_incidence([bad], 2)

    def test_hypergraph_validates_texts(self):
        with pytest.raises(ValueError):
            Hypergraph(node_count=2, edges=[[0, 1]], node_attrs=np.zeros((2, 1)), edge_texts=[])


class TestDegrees:
    def test_examples(self):
        e = build_incidence([[0, 1]], 2)
        assert node_degrees(e, 2).tolist() == [1, 1]
        assert edge_degrees(e).tolist() == [2]
        e = build_incidence([[0], [0, 1, 2]], 3)
        assert node_degrees(e, 3).tolist() == [2, 1, 1]
        assert edge_degrees(e).tolist() == [1, 3]

    def test_random_4x6_against_dense(self, rng):
        H = (rng.random((4, 6)) < 0.5).astype(float)
        H[0, H.sum(0) == 0] = 1.0
        edges = [np.flatnonzero(H[:, j]) for j in range(6)]
        assert np.array_equal(node_degrees(edges, 4), H @ np.ones(6))
        assert np.array_equal(edge_degrees(edges), H.T @ np.ones(4))

    @settings(max_examples=60, deadline=None)
    @given(hypergraphs())
    def test_degree_sums(self, hg):
        m, edges = hg
        H = dense_incidence(edges, m)
        assert np.array_equal(node_degrees(edges, m), H.sum(axis=1))
        assert np.array_equal(edge_degrees(edges), H.sum(axis=0))


class TestPropagationOperator:
    def test_two_node_edge(self):
        S = propagation_operator([[0, 1]], node_count=2).matrix.toarray()
        np.testing.assert_allclose(S, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
        np.testing.assert_allclose(S, dense_operator([[0, 1]], 2, np.ones(1)), atol=1e-15)

    def test_self_loops_give_identity(self):
        S = propagation_operator([[i] for i in range(5)], node_count=5).matrix.toarray()
        np.testing.assert_allclose(S, np.eye(5), atol=1e-15)

    def test_random_6x4_against_dense(self, rng):
        edges = random_edges(rng, 6, 4)
        S = propagation_operator(edges, node_count=6).matrix.toarray()
        assert np.max(np.abs(S - dense_operator(edges, 6, np.ones(4)))) <= 1e-12

    def test_isolated_node_row_is_zero(self):
        S = propagation_operator([[0, 1]], node_count=3).matrix.toarray()
        assert np.all(S[2] == 0) and np.all(S[:, 2] == 0)

    def test_isolated_nodes_warn(self):
        hg = Hypergraph(node_count=3, edges=[[0, 1]], node_attrs=np.zeros((3, 1)), edge_texts=["x"])
        with pytest.warns(UserWarning, match="isolated"):
            PropagationOperator.from_hypergraph(hg)

    def test_weight_shape_checked(self):
        with pytest.raises(ShapeMismatch):
            propagation_operator([[0, 1]], edge_weights=np.ones(2), node_count=2)

    def test_apply_matches_matrix(self, rng):
        edges = random_edges(rng, 9, 5)
        op = propagation_operator(edges, rng.random(5), node_count=9)
        Z = rng.normal(size=(9, 3))
        np.testing.assert_allclose(op.apply(Z), op.matrix @ Z, atol=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(hypergraphs(), st.data())
    def test_dense_oracle_symmetric_nonnegative(self, hg, data):
        m, edges = hg
        w = np.array(data.draw(st.lists(st.floats(0, 5), min_size=len(edges), max_size=len(edges))))
        S = propagation_operator(edges, w, node_count=m).matrix.toarray()
        assert np.max(np.abs(S - dense_operator(edges, m, w))) <= 1e-12
        assert np.max(np.abs(S - S.T)) <= 1e-12
        assert np.all(S >= 0)

    @settings(max_examples=40, deadline=None)
    @given(hypergraphs(), st.randoms(use_true_random=False))
    def test_edge_order_invariance(self, hg, rnd):
        m, edges = hg
        w = np.linspace(0.5, 2.0, len(edges))
        order = list(range(len(edges)))
        rnd.shuffle(order)
        S1 = propagation_operator(edges, w, node_count=m).matrix.toarray()
        S2 = propagation_operator([edges[j] for j in order], w[order], node_count=m).matrix.toarray()
        np.testing.assert_allclose(S1, S2, rtol=0, atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(hypergraphs(), st.sampled_from([0.5, 2.0, 4.0, 0.25]))
    def test_weight_scaling(self, hg, c):
        # powers of two keep the comparison exact
        m, edges = hg
        w = np.linspace(0.5, 2.0, len(edges))
        S1 = propagation_operator(edges, w, node_count=m).matrix.toarray()
        S2 = propagation_operator(edges, c * w, node_count=m).matrix.toarray()
        assert np.array_equal(S2, c * S1)

    def test_weight_scaling_generic(self, rng):
        edges = random_edges(rng, 10, 6)
        w = rng.random(6)
        S1 = propagation_operator(edges, w, node_count=10).matrix.toarray()
        S2 = propagation_operator(edges, 3.7 * w, node_count=10).matrix.toarray()
        np.testing.assert_allclose(S2, 3.7 * S1, rtol=1e-14, atol=0)


class TestProjection:
    def test_examples(self):
        assert coparticipation_projection(build_incidence([[0, 1]], 2)) == {(0, 1)}
        assert coparticipation_projection(build_incidence([[0], [1]], 2)) == set()
        assert coparticipation_projection(build_incidence([[0], [0, 1, 2]], 3)) == {(0, 1), (0, 2), (1, 2)}

    @settings(max_examples=60, deadline=None)
    @given(hypergraphs(max_m=30, max_t=8))
    def test_brute_force(self, hg):
        m, edges = hg
        H = dense_incidence(edges, m)
        expect = {
            (u, v) for u in range(m) for v in range(u + 1, m)
            if any(H[u, e] and H[v, e] for e in range(len(edges)))
        }
        assert coparticipation_projection(edges) == expect

    def test_density(self):
        n, links, density = projection_density(build_incidence([[0, 1], [2, 3]], 4))
        assert (n, links) == (4, 2)
        assert density == pytest.approx(2 / 6)


class TestHypergraphTransforms:
    def test_permute_nodes_roundtrip(self, rng):
        hg = Hypergraph(node_count=5, edges=random_edges(rng, 5, 3), node_attrs=rng.normal(size=(5, 2)),
                        edge_texts=["a", "b", "c"])
        perm = rng.permutation(5)
        inv = np.argsort(perm)
        assert hg.permute_nodes(perm).permute_nodes(inv).same_as(hg)

    def test_immutable(self, rng):
        hg = Hypergraph(node_count=3, edges=[[0, 1], [2]], node_attrs=np.zeros((3, 1)), edge_texts=["a", "b"])
        with pytest.raises(ValueError):
            hg.node_attrs[0, 0] = 1.0
        with pytest.raises(ValueError):
            hg.edges[0][0] = 2
