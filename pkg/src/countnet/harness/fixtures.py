"""Bundled synthetic fixtures and the generators that reproduce them.

The county-like network is a planar proximity graph: 62 random points in a
3 x 2 rectangle, Delaunay-triangulated, keeping edges shorter than the 0.8
quantile of edge lengths. The COVID-shaped series is a 783 x 62 GNARI(2)
realisation on that network with log-normal node-specific innovation means.
Run ``python -m countnet.harness.fixtures DIR`` to regenerate the CSVs.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

from ..gnari import GnariModel, simulate_gnari
from ..network import Network, build_network, fig1_network

N_COUNTIES = 62
COVID_T = 783
COVID_TRAIN = 700
NETWORK_SEED = 2020
SERIES_SEED = 7

FIG1_FILE = "fig1.csv"
COUNTY_FILE = "county_like_edges.csv"
COVID_FILE = "covid_like_783x62.csv"


def make_county_network(seed: int = NETWORK_SEED, n: int = N_COUNTIES):
    """Returns ``(network, rng)``; the rng continues to draw the innovation means."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2)) * np.array([3.0, 2.0])
    tri = Delaunay(pts)
    edges = set()
    for simplex in tri.simplices:
        for a in range(3):
            u, v = sorted((int(simplex[a]), int(simplex[(a + 1) % 3])))
            edges.add((u, v))
    edges = sorted(edges)
    lengths = np.array([np.linalg.norm(pts[u] - pts[v]) for u, v in edges])
    cut = np.quantile(lengths, 0.8)
    A = np.zeros((n, n), dtype=np.int64)
    for (u, v), d in zip(edges, lengths):
        if d < cut:
            A[u, v] = A[v, u] = 1
    ids = [f"C{k + 1:02d}" for k in range(n)]
    return build_network(A, node_ids=ids), rng


def make_covid_fixture(network_seed: int = NETWORK_SEED, series_seed: int = SERIES_SEED):
    """Regenerate ``(network, series)`` of the bundled 783 x 62 fixture."""
    net, rng = make_county_network(network_seed)
    lam = np.exp(rng.normal(1.0, 1.0, net.node_count))
    model = GnariModel.from_coefficients(net, [0.35, 0.2], [[0.2], [0.1]], lam)
    series = simulate_gnari(model, COVID_T, 200, np.random.default_rng(series_seed))
    return net, series


def data_path(name: str) -> Path:
    return Path(str(resources.files("countnet") / "data" / name))


def load_fig1() -> Network:
    from .io import read_adjacency

    return read_adjacency(data_path(FIG1_FILE))


def load_covid_fixture():
    """Bundled ``(network, series)``."""
    from .io import read_edge_list, read_series_csv

    series = read_series_csv(data_path(COVID_FILE))
    net = read_edge_list(data_path(COUNTY_FILE), node_ids=series.node_ids)
    return net, series


def write_fixtures(directory) -> None:
    from .io import write_adjacency, write_edge_list, write_series_csv

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_adjacency(fig1_network(), d / FIG1_FILE)
    net, series = make_covid_fixture()
    write_edge_list(net, d / COUNTY_FILE)
    write_series_csv(series, d / COVID_FILE)


if __name__ == "__main__":
    write_fixtures(sys.argv[1] if len(sys.argv) > 1 else data_path(""))
