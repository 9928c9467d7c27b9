import numpy as np
import pytest

from countnet.network import build_network, fig1_network


@pytest.fixture
def fig1():
    return fig1_network()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def edgeless3():
    return build_network(np.zeros((3, 3), dtype=int))


def bfs_distances(adjacency, source):
    """Plain queue BFS over out-edges; used as an oracle for stage sets."""
    n = len(adjacency)
    dist = {source: 0}
    queue = [source]
    while queue:
        u = queue.pop(0)
        for v in range(n):
            if adjacency[u][v] and v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist
