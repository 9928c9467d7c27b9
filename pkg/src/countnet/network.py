"""Static directed networks with staged neighbourhoods and connection weights.

Nodes are indexed ``0..N-1`` internally. A node ``j`` is an immediate
neighbour of ``i`` when ``adjacency[i, j] == 1`` (out-edge convention).
The r-th stage neighbours of ``i`` are the nodes at directed graph
distance exactly ``r`` from ``i``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np


class NetworkError(ValueError):
    """Raised for malformed adjacency input or invalid node/stage queries."""


@dataclass(frozen=True)
class Network:
    """Directed graph with cached stage sets and equal per-stage weights.

    Attributes
    ----------
    adjacency : ndarray of int, shape (N, N)
        0/1 matrix with zero diagonal.
    node_ids : tuple of str
        Labels used for CSV input/output.
    """

    adjacency: np.ndarray
    node_ids: tuple = ()
    _stages: list = field(default_factory=list, repr=False, compare=False)
    _weight_mats: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def out_degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def max_stage(self) -> int:
        """Largest stage index with a non-empty set for some node."""
        return max((len(s) for s in self._stages), default=0)

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.node_count:
            raise NetworkError(f"node index {i} out of range [0, {self.node_count})")

    def stage_neighbours(self, i: int, r: int) -> frozenset:
        """Nodes at directed distance exactly ``r`` from node ``i``."""
        self._check_node(i)
        if r < 1:
            raise NetworkError(f"stage must be >= 1, got {r}")
        stages = self._stages[i]
        return stages[r - 1] if r <= len(stages) else frozenset()

    def stage_weights(self, i: int, r: int) -> dict:
        """Equal allocation ``1/|stage set|`` over the r-th stage neighbours."""
        nbrs = self.stage_neighbours(i, r)
        if not nbrs:
            return {}
        w = 1.0 / len(nbrs)
        return {q: w for q in sorted(nbrs)}

    def weight_matrix(self, r: int) -> np.ndarray:
        """Matrix ``W`` with ``W[l, m] = w_{l,m}`` if ``m`` is an r-stage neighbour of ``l``."""
        if r < 1:
            raise NetworkError(f"stage must be >= 1, got {r}")
        if r not in self._weight_mats:
            n = self.node_count
            W = np.zeros((n, n))
            for i in range(n):
                for q, w in self.stage_weights(i, r).items():
                    W[i, q] = w
            W.setflags(write=False)
            self._weight_mats[r] = W
        return self._weight_mats[r]

    def diameter(self) -> int:
        return self.max_stage

    def relabel(self, perm) -> "Network":
        """Network with node ``k`` of the result being node ``perm[k]`` of this one."""
        perm = np.asarray(perm)
        ids = tuple(self.node_ids[k] for k in perm)
        return build_network(self.adjacency[np.ix_(perm, perm)], node_ids=ids)


def _bfs_stages(adjacency: np.ndarray, source: int) -> list:
    n = adjacency.shape[0]
    dist = np.full(n, -1)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adjacency[u]):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    depth = dist.max()
    return [frozenset(int(v) for v in np.flatnonzero(dist == r)) for r in range(1, depth + 1)]


def build_network(adjacency, node_ids=None) -> Network:
    """Validate a 0/1 adjacency matrix and precompute every stage set.

    Parameters
    ----------
    adjacency : array_like, shape (N, N)
        Square 0/1 matrix with zero diagonal.
    node_ids : sequence of str, optional
        Node labels; defaults to ``"1".."N"``.

    Raises
    ------
    NetworkError
        If the matrix is not square, has entries outside {0, 1}, or has
        self-loops.
    """
    A = np.asarray(adjacency)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NetworkError(f"adjacency must be square, got shape {A.shape}")
    if A.shape[0] == 0:
        raise NetworkError("adjacency must have at least one node")
    if not np.all((A == 0) | (A == 1)):
        raise NetworkError("adjacency entries must be 0 or 1")
    A = A.astype(np.int64)
    if np.any(np.diag(A) != 0):
        bad = np.flatnonzero(np.diag(A)).tolist()
        raise NetworkError(f"self-loops not allowed (nodes {bad})")
    n = A.shape[0]
    if node_ids is None:
        node_ids = tuple(str(k + 1) for k in range(n))
    else:
        node_ids = tuple(str(x) for x in node_ids)
        if len(node_ids) != n:
            raise NetworkError(f"{len(node_ids)} node ids for {n} nodes")
    A.setflags(write=False)
    stages = [_bfs_stages(A, i) for i in range(n)]
    return Network(adjacency=A, node_ids=node_ids, _stages=stages)


def network_from_edges(edges, n_nodes: int, node_ids=None, symmetric: bool = True) -> Network:
    """Build a network from an edge list of 0-based ``(u, v)`` pairs."""
    A = np.zeros((n_nodes, n_nodes), dtype=np.int64)
    for u, v in edges:
        A[u, v] = 1
        if symmetric:
            A[v, u] = 1
    return build_network(A, node_ids=node_ids)


FIG1_ADJACENCY = np.array(
    [
        [0, 1, 0, 1, 1],
        [1, 0, 0, 0, 0],
        [0, 0, 0, 1, 1],
        [0, 0, 1, 0, 1],
        [1, 0, 1, 0, 0],
    ]
)


def fig1_network() -> Network:
    """The five-node simulation network, stored exactly as printed (directed)."""
    return build_network(FIG1_ADJACENCY)
