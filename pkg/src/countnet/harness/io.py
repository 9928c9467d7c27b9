"""CSV and JSON input/output for series, networks, fits and forecasts.

Formats
-------
series CSV
    Header row of node ids, then one row of N integer counts per time step.
adjacency CSV
    N rows of N comma-separated 0/1 integers, optionally preceded by a
    header row of node ids.
edge-list CSV
    Header ``source,target``; one undirected edge per row, using node ids.
fit JSON
    :meth:`countnet.results.FitResult.to_dict` output.
forecast CSV
    Header ``step`` plus node ids; one row per forecast horizon.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..design import CountSeries
from ..network import Network, build_network
from ..results import FitResult


class DataFormatError(ValueError):
    """Malformed input file; the message names the file and row."""


def _rows(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="") as fh:
        return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]


def _parse_count(cell, path, lineno):
    cell = cell.strip()
    try:
        value = int(cell)
    except ValueError:
        try:
            f = float(cell)
        except ValueError:
            raise DataFormatError(f"{path}: row {lineno}: {cell!r} is not an integer count") from None
        if not f.is_integer():
            raise DataFormatError(f"{path}: row {lineno}: {cell!r} is not an integer count") from None
        value = int(f)
    if value < 0:
        raise DataFormatError(f"{path}: row {lineno}: negative count {value}")
    return value


def read_series_csv(path) -> CountSeries:
    rows = _rows(path)
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one time step")
    header = [h.strip() for h in rows[0]]
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {lineno}: expected {len(header)} values, got {len(row)}")
        data.append([_parse_count(c, path, lineno) for c in row])
    return CountSeries(np.array(data, dtype=np.int64).T, node_ids=header)


def write_series_csv(series: CountSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(series.node_ids)
        w.writerows(series.data.T.tolist())


def read_adjacency(path) -> Network:
    rows = _rows(path)
    if not rows:
        raise DataFormatError(f"{path}: empty adjacency file")
    n = len(rows[0])
    header = None
    if len(rows) == n + 1:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    if len(rows) != n:
        raise DataFormatError(f"{path}: adjacency must have {n} rows of {n} entries, got {len(rows)} rows")
    A = np.zeros((n, n), dtype=np.int64)
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if len(row) != n:
            raise DataFormatError(f"{path}: row {lineno}: expected {n} entries, got {len(row)}")
        for k, cell in enumerate(row):
            cell = cell.strip()
            if cell not in ("0", "1"):
                raise DataFormatError(f"{path}: row {lineno}: entry {cell!r} is not 0 or 1")
            A[lineno - (2 if header else 1), k] = int(cell)
    try:
        return build_network(A, node_ids=header)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def write_adjacency(net: Network, path, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(net.node_ids)
        w.writerows(net.adjacency.tolist())


def read_edge_list(path, node_ids=None) -> Network:
    """Undirected network from a ``source,target`` CSV of node ids."""
    rows = _rows(path)
    if not rows or [c.strip() for c in rows[0]] != ["source", "target"]:
        raise DataFormatError(f"{path}: edge list must start with a 'source,target' header")
    edges = [(a.strip(), b.strip()) for a, b in rows[1:]]
    if node_ids is None:
        seen = {}
        for a, b in edges:
            seen.setdefault(a, None)
            seen.setdefault(b, None)
        node_ids = sorted(seen, key=_natural_key)
    index = {nid: k for k, nid in enumerate(node_ids)}
    A = np.zeros((len(node_ids), len(node_ids)), dtype=np.int64)
    for lineno, (a, b) in enumerate(edges, start=2):
        if a not in index or b not in index:
            raise DataFormatError(f"{path}: row {lineno}: unknown node id")
        A[index[a], index[b]] = A[index[b], index[a]] = 1
    return build_network(A, node_ids=node_ids)


def write_edge_list(net: Network, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "target"])
        ids = net.node_ids
        for u, v in zip(*np.nonzero(np.triu(net.adjacency))):
            w.writerow([ids[u], ids[v]])


def _natural_key(s):
    return (len(s), s)


def read_network(path) -> Network:
    """Adjacency CSV or edge-list CSV, detected from the first row."""
    first = _rows(path)[0]
    if [c.strip() for c in first] == ["source", "target"]:
        return read_edge_list(path)
    return read_adjacency(path)


def split_train_test(series: CountSeries, train_len: int):
    """Split at ``train_len`` preserving time order; both parts must be non-empty."""
    T = series.length
    if not 0 < train_len < T:
        raise ValueError(f"train length must be in (0, {T}) so the test set is non-empty, got {train_len}")
    return series.window(0, train_len), series.window(train_len, T)


def write_fit_json(fit: FitResult, path, extra: dict = None) -> None:
    doc = fit.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_fit_json(path) -> FitResult:
    with open(path) as fh:
        return FitResult.from_dict(json.load(fh))


def write_forecast_csv(forecast: np.ndarray, node_ids, path, model: str = None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", *node_ids])
        for h in range(forecast.shape[1]):
            w.writerow([h + 1, *(repr(float(x)) for x in forecast[:, h])])


def read_forecast_csv(path):
    """Returns ``(forecast N x H, node_ids)``."""
    rows = _rows(path)
    ids = [c.strip() for c in rows[0][1:]]
    values = np.array([[float(c) for c in row[1:]] for row in rows[1:]], dtype=float)
    return values.T, ids


def write_rows_csv(rows, header, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])
