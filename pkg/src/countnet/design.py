"""Model orders, parameter layout, regression design and stationarity tools.

All models here share one linear predictor

    eta_{i,t} = sum_j ( alpha_{i,j} X_{i,t-j}
                        + sum_{r<=s_j} beta_{j,r} sum_q w_{i,q} X_{q,t-j} ) + c_i

and one coefficient layout: for each lag ``j`` the autoregressive
coefficient(s) (if the lag is included) followed by ``beta_{j,1..s_j}``;
the intercept(s) come last. With a local alpha the N per-node
coefficients of a lag are stored node-within-lag.

Rows of the design matrix are node-major: the row for node ``i`` and time
``t`` (0-based, ``t = p..T-1``) sits at ``i * (T - p) + (t - p)``, the same
ordering as the stacked target vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .network import Network

INTERCEPT_MODES = ("innovation", "intercept", "none")


@dataclass(frozen=True)
class ModelOrder:
    """Lag order, neighbour stages and autoregressive inclusion flags.

    Parameters
    ----------
    p : int
        Lag order.
    s : tuple of int
        Neighbour stage depth per lag (``s[j-1]`` stages at lag ``j``).
    alpha_mask : tuple of int, optional
        1 if the own-lag term at lag ``j`` is included. All ones by default.
    global_alpha : bool
        Share autoregressive coefficients across nodes.
    intercept_mode : {"innovation", "intercept", "none"}
        ``"innovation"`` is the GNARI innovation mean lambda, ``"intercept"``
        the additive alpha_0 of GNAR/NGNAR/PNAR. Both occupy the same slot.
    local_intercept : bool
        One intercept per node instead of a shared one.
    """

    p: int
    s: tuple
    alpha_mask: tuple = None
    global_alpha: bool = True
    intercept_mode: str = "intercept"
    local_intercept: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"lag order must be >= 1, got {self.p}")
        object.__setattr__(self, "s", tuple(int(x) for x in self.s))
        mask = (1,) * self.p if self.alpha_mask is None else tuple(int(x) for x in self.alpha_mask)
        object.__setattr__(self, "alpha_mask", mask)
        if len(self.s) != self.p or len(mask) != self.p:
            raise ValueError(f"s and alpha_mask must have length p={self.p}")
        if any(x < 0 for x in self.s):
            raise ValueError("stage depths must be non-negative")
        if any(x not in (0, 1) for x in mask):
            raise ValueError("alpha_mask entries must be 0 or 1")
        if self.intercept_mode not in INTERCEPT_MODES:
            raise ValueError(f"intercept_mode must be one of {INTERCEPT_MODES}")

    @classmethod
    def simple(cls, p: int = 1, stages: int = 1, **kw) -> "ModelOrder":
        """Order with every lag included and ``stages`` neighbour stages per lag."""
        return cls(p=p, s=(stages,) * p, **kw)

    def n_intercepts(self, n_nodes: int) -> int:
        if self.intercept_mode == "none":
            return 0
        return n_nodes if self.local_intercept else 1

    def n_params(self, n_nodes: int) -> int:
        per_alpha = 1 if self.global_alpha else n_nodes
        return sum(a * per_alpha + sj for a, sj in zip(self.alpha_mask, self.s)) + self.n_intercepts(
            n_nodes
        )

    def param_names(self, node_ids) -> list:
        intercept = "lambda" if self.intercept_mode == "innovation" else "alpha_0"
        names = []
        for j in range(1, self.p + 1):
            if self.alpha_mask[j - 1]:
                if self.global_alpha:
                    names.append(f"alpha_{j}")
                else:
                    names.extend(f"alpha_{j}[{nid}]" for nid in node_ids)
            names.extend(f"beta_{j}_{r}" for r in range(1, self.s[j - 1] + 1))
        if self.intercept_mode != "none":
            if self.local_intercept:
                names.extend(f"{intercept}[{nid}]" for nid in node_ids)
            else:
                names.append(intercept)
        return names

    def effective_lag(self) -> int:
        """Largest lag with any term left, 0 for intercept-only orders."""
        used = [j + 1 for j in range(self.p) if self.alpha_mask[j] or self.s[j]]
        return max(used, default=0)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "s": list(self.s),
            "alpha_mask": list(self.alpha_mask),
            "global_alpha": self.global_alpha,
            "intercept_mode": self.intercept_mode,
            "local_intercept": self.local_intercept,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelOrder":
        return cls(
            p=int(d["p"]),
            s=tuple(d["s"]),
            alpha_mask=tuple(d.get("alpha_mask") or (1,) * int(d["p"])),
            global_alpha=bool(d.get("global_alpha", True)),
            intercept_mode=d.get("intercept_mode", "intercept"),
            local_intercept=bool(d.get("local_intercept", False)),
        )

    def with_intercept_mode(self, mode: str) -> "ModelOrder":
        return replace(self, intercept_mode=mode)


@dataclass
class ParamVector:
    """Coefficient values in the shared layout, with per-entry closed bounds."""

    values: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        k = self.values.size
        self.lower = np.full(k, -np.inf) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.full(k, np.inf) if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (k,) or self.upper.shape != (k,):
            raise ValueError("bounds must match the parameter length")

    def __len__(self):
        return self.values.size

    def in_bounds(self, tol: float = 0.0) -> bool:
        return bool(np.all(self.values >= self.lower - tol) and np.all(self.values <= self.upper + tol))

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True)
class CountSeries:
    """N x T matrix of non-negative integer counts with labels."""

    data: np.ndarray
    node_ids: tuple = None
    time_index: tuple = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"count data must be 2-D (N x T), got shape {data.shape}")
        if data.dtype.kind == "f":
            if np.any(~np.isfinite(data)):
                raise ValueError("missing or non-finite values are not supported")
            if np.any(data != np.round(data)):
                raise ValueError("counts must be integers")
        elif data.dtype.kind not in "iu":
            raise ValueError(f"unsupported dtype {data.dtype}")
        if np.any(data < 0):
            raise ValueError("counts must be non-negative")
        data = data.astype(np.int64)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        n, t = data.shape
        ids = tuple(str(k + 1) for k in range(n)) if self.node_ids is None else tuple(map(str, self.node_ids))
        idx = tuple(range(1, t + 1)) if self.time_index is None else tuple(self.time_index)
        if len(ids) != n or len(idx) != t:
            raise ValueError("label lengths do not match data shape")
        object.__setattr__(self, "node_ids", ids)
        object.__setattr__(self, "time_index", idx)

    @property
    def n_nodes(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]

    def window(self, start: int, stop: int) -> "CountSeries":
        return CountSeries(self.data[:, start:stop], self.node_ids, self.time_index[start:stop])


def _as_matrix(series) -> np.ndarray:
    return series.data if isinstance(series, CountSeries) else np.asarray(series)


def build_target(series, p: int) -> np.ndarray:
    """Stacked targets ``(X_{1,p+1..T}, ..., X_{N,p+1..T})``, node-major."""
    X = _as_matrix(series)
    if X.shape[1] <= p:
        raise ValueError(f"series length {X.shape[1]} must exceed lag order {p}")
    return X[:, p:].astype(float).ravel()


def neighbour_sums(X: np.ndarray, net: Network, r: int) -> np.ndarray:
    """``S[i, t] = sum_q w_{i,q} X[q, t]`` over the r-th stage neighbours of ``i``."""
    return net.weight_matrix(r) @ X


def build_design(series, net: Network, order: ModelOrder) -> np.ndarray:
    """Regression design with one row per (node, time) pair and layout-ordered columns."""
    X = _as_matrix(series).astype(float)
    N, T = X.shape
    p = order.p
    if T <= p:
        raise ValueError(f"series length {T} must exceed lag order {p}")
    if N != net.node_count:
        raise ValueError(f"series has {N} nodes, network has {net.node_count}")
    if max(order.s, default=0) > max(net.max_stage, 0) and max(order.s) > 0:
        raise ValueError(f"stage depth {max(order.s)} exceeds network diameter {net.max_stage}")
    n_t = T - p
    cols = []
    sums = {r: neighbour_sums(X, net, r) for r in range(1, max(order.s, default=0) + 1)}
    node_of_row = np.repeat(np.arange(N), n_t)
    for j in range(1, p + 1):
        lagged = X[:, p - j : T - j].ravel()
        if order.alpha_mask[j - 1]:
            if order.global_alpha:
                cols.append(lagged)
            else:
                for i in range(N):
                    cols.append(np.where(node_of_row == i, lagged, 0.0))
        for r in range(1, order.s[j - 1] + 1):
            cols.append(sums[r][:, p - j : T - j].ravel())
    if order.intercept_mode != "none":
        if order.local_intercept:
            for i in range(N):
                cols.append((node_of_row == i).astype(float))
        else:
            cols.append(np.ones(N * n_t))
    if not cols:
        return np.zeros((N * n_t, 0))
    return np.column_stack(cols)


@dataclass(frozen=True)
class Coefficients:
    """Coefficients unpacked from the flat layout.

    alpha : (N, p) own-lag coefficients, zero where a lag is excluded.
    beta : list of p arrays, ``beta[j-1][r-1]`` is ``beta_{j,r}``.
    intercept : (N,) intercept or innovation mean per node.
    """

    alpha: np.ndarray
    beta: list
    intercept: np.ndarray


def unpack(order: ModelOrder, values, n_nodes: int) -> Coefficients:
    values = np.asarray(values, dtype=float)
    if values.size != order.n_params(n_nodes):
        raise ValueError(f"expected {order.n_params(n_nodes)} parameters, got {values.size}")
    alpha = np.zeros((n_nodes, order.p))
    beta = []
    k = 0
    for j in range(order.p):
        if order.alpha_mask[j]:
            if order.global_alpha:
                alpha[:, j] = values[k]
                k += 1
            else:
                alpha[:, j] = values[k : k + n_nodes]
                k += n_nodes
        beta.append(values[k : k + order.s[j]].copy())
        k += order.s[j]
    if order.intercept_mode == "none":
        intercept = np.zeros(n_nodes)
    elif order.local_intercept:
        intercept = values[k : k + n_nodes].copy()
    else:
        intercept = np.full(n_nodes, values[k])
    return Coefficients(alpha=alpha, beta=beta, intercept=intercept)


def pack(order: ModelOrder, alpha, beta, intercept, n_nodes: int) -> np.ndarray:
    """Inverse of :func:`unpack`.

    ``alpha`` is either length ``p`` (global) or ``(N, p)``; ``beta`` a list
    of per-lag stage coefficients; ``intercept`` a scalar or length-N array.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim == 1:
        alpha = np.tile(alpha, (n_nodes, 1))
    out = []
    for j in range(order.p):
        if order.alpha_mask[j]:
            out.extend([alpha[0, j]] if order.global_alpha else alpha[:, j].tolist())
        out.extend(np.asarray(beta[j], dtype=float)[: order.s[j]].tolist())
    if order.intercept_mode != "none":
        intercept = np.broadcast_to(np.asarray(intercept, dtype=float), (n_nodes,))
        out.extend(intercept.tolist() if order.local_intercept else [intercept[0]])
    return np.array(out, dtype=float)


def stationarity_margin(order: ModelOrder, params, n_nodes: int = 1) -> float:
    """``max_i sum_j (|alpha_{i,j}| + sum_{r<=s_j} |beta_{j,r}|)``; below 1 is sufficient for stationarity."""
    values = params.values if isinstance(params, ParamVector) else params
    c = unpack(order, values, n_nodes)
    beta_total = sum(np.abs(b).sum() for b in c.beta)
    return float(np.max(np.abs(c.alpha).sum(axis=1)) + beta_total)


def lag_matrices(order: ModelOrder, params, net: Network) -> list:
    """``A_j = diag(alpha_{.,j}) + sum_r beta_{j,r} W^(r)`` for ``j = 1..p``."""
    values = params.values if isinstance(params, ParamVector) else params
    c = unpack(order, values, net.node_count)
    mats = []
    for j in range(order.p):
        A = np.diag(c.alpha[:, j])
        for r, b in enumerate(c.beta[j], start=1):
            A = A + b * net.weight_matrix(r)
        mats.append(A)
    return mats


def companion_matrix(order: ModelOrder, params, net: Network) -> np.ndarray:
    """Block companion matrix of the stacked first-order (Np-dimensional) system."""
    mats = lag_matrices(order, params, net)
    N, p = net.node_count, order.p
    A = np.zeros((N * p, N * p))
    A[:N, :] = np.hstack(mats)
    if p > 1:
        A[N:, :-N] = np.eye(N * (p - 1))
    return A


def spectral_radius(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(A)))) if A.size else 0.0


def stationary_mean(order: ModelOrder, params, net: Network, innovation_means) -> np.ndarray:
    """Solve ``(I - sum_j A_j) mu = lambda`` for the stationary node means."""
    mats = lag_matrices(order, params, net)
    N = net.node_count
    lam = np.broadcast_to(np.asarray(innovation_means, dtype=float), (N,))
    M = np.eye(N) - sum(mats)
    if np.linalg.cond(M) > 1e12:
        raise np.linalg.LinAlgError("I - sum_j A_j is singular; parameters are not stationary")
    return np.linalg.solve(M, lam)


def linear_predictor(order: ModelOrder, params, net: Network, history: np.ndarray) -> np.ndarray:
    """``eta`` for the step after ``history`` (N x >=p, most recent column last)."""
    values = params.values if isinstance(params, ParamVector) else params
    history = np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape[1] < order.p:
        raise ValueError(f"history must supply {order.p} lags")
    c = unpack(order, values, net.node_count)
    eta = c.intercept.copy()
    for j, A in enumerate(lag_matrices(order, values, net), start=1):
        eta += A @ history[:, -j]
    return eta


def forecast_recursive(order: ModelOrder, params, net: Network, history, horizon: int, link=None) -> np.ndarray:
    """Mean forecasts for ``horizon`` steps, feeding earlier forecasts back as lags.

    ``link`` maps the linear predictor to the conditional mean (identity
    when omitted). Returns an ``N x horizon`` real matrix.
    """
    values = params.values if isinstance(params, ParamVector) else np.asarray(params, dtype=float)
    hist = np.asarray(_as_matrix(history), dtype=float)
    if hist.ndim != 2 or hist.shape[1] < order.p:
        raise ValueError(f"history must supply at least {order.p} time steps")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mats = lag_matrices(order, values, net)
    c = unpack(order, values, net.node_count)
    window = [hist[:, -j] for j in range(order.p, 0, -1)]
    out = np.empty((net.node_count, horizon))
    for h in range(horizon):
        eta = c.intercept.copy()
        for j, A in enumerate(mats, start=1):
            eta += A @ window[-j]
        mean = eta if link is None else link(eta)
        out[:, h] = mean
        window.append(mean)
        window.pop(0)
    return out
