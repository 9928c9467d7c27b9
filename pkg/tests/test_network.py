import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countnet.network import (
    FIG1_ADJACENCY,
    NetworkError,
    build_network,
    network_from_edges,
)

from conftest import bfs_distances


def test_fig1_first_neighbourhood(fig1):
    # nodes are 0-based internally; ids "1".."5" map to indices 0..4
    assert fig1.stage_neighbours(0, 1) == {1, 3, 4}
    assert [fig1.node_ids[q] for q in sorted(fig1.stage_neighbours(0, 1))] == ["2", "4", "5"]


def test_fig1_second_stage_matches_bfs(fig1):
    dist = bfs_distances(FIG1_ADJACENCY, 0)
    expected = {v for v, d in dist.items() if d == 2}
    assert fig1.stage_neighbours(0, 2) == expected == {2}


def test_edgeless_network_has_empty_stages(edgeless3):
    for i in range(3):
        assert edgeless3.stage_neighbours(i, 1) == frozenset()
        assert edgeless3.stage_weights(i, 1) == {}
    assert edgeless3.max_stage == 0


def test_self_loop_rejected():
    with pytest.raises(NetworkError):
        build_network([[1, 0], [0, 0]])


@pytest.mark.parametrize(
    "adj",
    [np.zeros((2, 3)), [[0, 2], [1, 0]], [[0, 0.5], [1, 0]]],
)
def test_invalid_adjacency_rejected(adj):
    with pytest.raises(NetworkError):
        build_network(adj)


def test_node_index_out_of_range(fig1):
    with pytest.raises(NetworkError, match="out of range"):
        fig1.stage_neighbours(5, 1)
    with pytest.raises(ValueError):
        fig1.stage_neighbours(0, 0)


def test_equal_weights(fig1):
    assert fig1.stage_weights(0, 1) == pytest.approx({1: 1 / 3, 3: 1 / 3, 4: 1 / 3})
    assert fig1.stage_weights(1, 1) == {0: 1.0}
    assert fig1.stage_weights(0, 3) == {}


def test_weight_matrix_rows(fig1):
    W = fig1.weight_matrix(1)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    assert not W.flags.writeable
    np.testing.assert_array_equal(W > 0, FIG1_ADJACENCY == 1)


def test_out_edge_semantics():
    # 0 -> 1 only: node 1 has no out-neighbours
    net = build_network([[0, 1], [0, 0]])
    assert net.stage_neighbours(0, 1) == {1}
    assert net.stage_neighbours(1, 1) == frozenset()
    np.testing.assert_array_equal(net.out_degree, [1, 0])


def test_edges_constructor_symmetric():
    net = network_from_edges([(0, 1), (1, 2)], 3)
    assert net.stage_neighbours(0, 2) == {2}
    assert net.diameter() == 2


adjacency_strategy = st.integers(1, 8).flatmap(
    lambda n: st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=n, max_size=n)
)


def _clean(a):
    a = np.array(a, dtype=int)
    np.fill_diagonal(a, 0)
    return a


@settings(max_examples=60, deadline=None)
@given(adjacency_strategy)
def test_stages_equal_bfs_distances(a):
    a = _clean(a)
    net = build_network(a)
    for i in range(len(a)):
        dist = bfs_distances(a, i)
        seen = set()
        for r in range(1, len(a) + 1):
            stage = net.stage_neighbours(i, r)
            assert stage == {v for v, d in dist.items() if d == r}
            assert i not in stage
            assert not (stage & seen)
            seen |= stage
            w = net.stage_weights(i, r)
            if stage:
                assert all(0 < x <= 1 for x in w.values())
                assert abs(sum(w.values()) - 1) <= 1e-12
        assert seen == set(dist) - {i}


@settings(max_examples=40, deadline=None)
@given(adjacency_strategy, st.randoms(use_true_random=False))
def test_relabel_equivariance(a, rnd):
    a = _clean(a)
    n = len(a)
    perm = list(range(n))
    rnd.shuffle(perm)
    net = build_network(a)
    shuffled = net.relabel(perm)
    inv = np.argsort(perm)
    back = shuffled.relabel(inv)
    for i in range(n):
        for r in range(1, n + 1):
            assert back.stage_neighbours(i, r) == net.stage_neighbours(i, r)
