import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ndda.graph import (GraphError, Topology, WeightMatrix, erdos_renyi, metropolis_weights,
                        second_singular_value)

from conftest import small_graphs
from oracles import sigma2_oracle


def test_complete_triangle():
    topo = erdos_renyi(3, 1.0, seed=99)
    assert topo.sorted_edges() == [(0, 1), (0, 2), (1, 2)]


def test_two_nodes():
    topo = erdos_renyi(2, 1.0, seed=5)
    assert topo.to_dict() == {"n": 2, "edges": [[1, 2]]}
    assert topo.is_connected()


def test_full_size_graph_is_connected():
    topo = erdos_renyi(50, 0.1, seed=7)
    assert topo.n == 50 and topo.is_connected()


def test_er_is_seed_deterministic():
    assert erdos_renyi(20, 0.2, 3) == erdos_renyi(20, 0.2, 3)


def test_er_gives_up():
    with pytest.raises(GraphError, match="too small"):
        erdos_renyi(40, 1e-4, 0)


@pytest.mark.parametrize("n, ratio", [(1, 0.5), (5, 0.0), (5, 1.5)])
def test_er_rejects_bad_args(n, ratio):
    with pytest.raises(GraphError):
        erdos_renyi(n, ratio, 0)


def test_topology_rejects_self_loop_and_duplicates():
    with pytest.raises(GraphError):
        Topology(3, frozenset({(1, 1)}))
    with pytest.raises(GraphError, match="duplicate"):
        Topology.from_edges(3, [(0, 1), (1, 0)])


def test_metropolis_path():
    P = metropolis_weights(Topology.path(3)).entries
    expected = np.array([[2, 1, 0], [1, 1, 1], [0, 1, 2]]) / 3
    np.testing.assert_allclose(P, expected, atol=1e-15)


def test_metropolis_two_nodes():
    np.testing.assert_allclose(metropolis_weights(Topology.complete(2)).entries, 0.5)


def test_metropolis_rejects_disconnected():
    with pytest.raises(GraphError, match="connected"):
        metropolis_weights(Topology(4, frozenset({(0, 1), (2, 3)})))


@pytest.mark.parametrize("topo", small_graphs(), ids=lambda t: f"n{t.n}e{len(t.edges)}")
def test_metropolis_invariants(topo):
    W = metropolis_weights(topo)
    P = W.entries
    assert np.array_equal(P, P.T)
    assert np.all(np.diag(P) > 0)
    assert np.max(np.abs(P.sum(axis=0) - 1)) <= 1e-12
    assert np.max(np.abs(P.sum(axis=1) - 1)) <= 1e-12
    assert W.respects(topo)


def test_weight_matrix_validation():
    with pytest.raises(GraphError, match="diagonal"):
        WeightMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(GraphError, match="rows"):
        WeightMatrix(np.array([[0.6, 0.5], [0.4, 0.5]]))


def test_beta_complete_averaging():
    assert second_singular_value(np.full((5, 5), 0.2)).beta == pytest.approx(0, abs=1e-15)


def test_beta_path():
    beta = second_singular_value(metropolis_weights(Topology.path(3))).beta
    assert beta == pytest.approx(2 / 3, rel=1e-10)


def test_beta_identity():
    assert second_singular_value(np.eye(4)).beta == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("topo", small_graphs(), ids=lambda t: f"n{t.n}e{len(t.edges)}")
def test_beta_matches_jacobi(topo):
    W = metropolis_weights(topo)
    assert abs(second_singular_value(W).beta - sigma2_oracle(W.entries)) <= 1e-8


@settings(max_examples=40, deadline=None)
@given(n=st.integers(3, 25), ratio=st.floats(0.2, 1.0), seed=st.integers(0, 2**32))
def test_beta_below_one_when_connected(n, ratio, seed):
    beta = second_singular_value(metropolis_weights(erdos_renyi(n, ratio, seed))).beta
    assert 0 <= beta < 1


def test_json_roundtrip(tmp_path):
    topo = erdos_renyi(6, 0.6, 2)
    W = metropolis_weights(topo)
    doc = json.loads(json.dumps(topo.to_dict()))
    assert min(min(e) for e in doc["edges"]) >= 1
    assert Topology.from_dict(doc) == topo
    W2 = WeightMatrix.from_dict(json.loads(json.dumps(W.to_dict())))
    assert np.array_equal(W.entries, W2.entries)
