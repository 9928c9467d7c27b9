"""Poisson-GNARI: network INAR processes built from binomial thinning.

The process is simulated in its single-thinning form, where neighbour
``q`` of node ``i`` at stage ``r`` contributes ``(beta_{j,r} w_{i,q}) o
X_{q,t-j}``. Conditionally on the past this has the same law as the
nested-thinning definition, and it makes the lag-``j`` dynamics a
thinning by the matrix ``A_j = diag(alpha_{.,j}) + sum_r beta_{j,r} W^(r)``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .design import (
    CountSeries,
    ModelOrder,
    ParamVector,
    build_design,
    build_target,
    companion_matrix,
    forecast_recursive,
    lag_matrices,
    pack,
    stationarity_margin,
    stationary_mean,
    unpack,
)
from .dists import repeated_poisson_binomial_pmf, thin_array, truncated_poisson_pmf
from .network import Network
from .optimize import box_lsq, solve_normal_equations
from .results import FitResult

logger = logging.getLogger(__name__)


def gnari_bounds(order: ModelOrder, n_nodes: int):
    """Box constraints: thinning coefficients in [0, 1], innovation means >= 0."""
    k = order.n_params(n_nodes)
    lower = np.zeros(k)
    upper = np.ones(k)
    n_int = order.n_intercepts(n_nodes)
    if n_int:
        upper[k - n_int :] = np.inf
    return lower, upper


@dataclass
class GnariModel:
    """A Poisson-GNARI process on a fixed network."""

    net: Network
    order: ModelOrder
    params: ParamVector

    def __post_init__(self):
        if self.order.intercept_mode != "innovation":
            self.order = self.order.with_intercept_mode("innovation")
        N = self.net.node_count
        lo, hi = gnari_bounds(self.order, N)
        if not isinstance(self.params, ParamVector):
            self.params = ParamVector(self.params)
        self.params = ParamVector(self.params.values, lo, hi, self.order.param_names(self.net.node_ids))
        if not self.params.in_bounds():
            raise ValueError("GNARI coefficients must lie in [0, 1] and innovation means must be >= 0")
        for A in self.thinning_matrices():
            if np.any(A > 1.0):
                raise ValueError("thinning probability beta * w exceeds 1")

    @classmethod
    def from_coefficients(cls, net: Network, alpha, beta, lam, order: ModelOrder = None) -> "GnariModel":
        """Convenience constructor, e.g. ``from_coefficients(net, [0.5], [[0.4]], 10)``."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        p = alpha.shape[-1]
        if order is None:
            order = ModelOrder(
                p=p,
                s=tuple(len(b) for b in beta),
                global_alpha=alpha.ndim == 1,
                intercept_mode="innovation",
                local_intercept=np.ndim(lam) > 0,
            )
        return cls(net, order, ParamVector(pack(order, alpha, beta, lam, net.node_count)))

    @property
    def coefficients(self):
        return unpack(self.order, self.params.values, self.net.node_count)

    @property
    def innovation_means(self) -> np.ndarray:
        return self.coefficients.intercept

    def thinning_matrices(self) -> list:
        return lag_matrices(self.order, self.params.values, self.net)

    def stationarity_margin(self) -> float:
        return stationarity_margin(self.order, self.params, self.net.node_count)

    def stationary_mean(self) -> np.ndarray:
        return stationary_mean(self.order, self.params, self.net, self.innovation_means)


def simulate_gnari(model: GnariModel, T: int, burn_in: int, rng: np.random.Generator, initial=None) -> CountSeries:
    """Simulate ``T`` observations after discarding ``burn_in`` steps.

    Parameters
    ----------
    initial : array_like, shape (N, p), optional
        Starting lags (oldest first). Independent Poisson(lambda_i) draws
        when omitted.
    """
    if burn_in < 0 or T < 1:
        raise ValueError("need T >= 1 and burn_in >= 0")
    if model.stationarity_margin() >= 1:
        warnings.warn("parameters do not satisfy the sufficient stationarity condition", RuntimeWarning)
    N, p = model.net.node_count, model.order.p
    lam = model.innovation_means
    mats = model.thinning_matrices()
    total = p + burn_in + T
    X = np.zeros((N, total), dtype=np.int64)
    if initial is None:
        X[:, :p] = rng.poisson(lam[:, None], size=(N, p))
    else:
        X[:, :p] = np.asarray(initial, dtype=np.int64).reshape(N, p)
    active = [(j, A) for j, A in enumerate(mats, start=1) if np.any(A > 0)]
    for t in range(p, total):
        x = rng.poisson(lam)
        for j, A in active:
            x += thin_array(A, np.broadcast_to(X[:, t - j], A.shape), rng).sum(axis=1)
        X[:, t] = x
    return CountSeries(X[:, p + burn_in :], node_ids=model.net.node_ids)


def _history(history, p):
    H = np.asarray(history.data if isinstance(history, CountSeries) else history, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    if H.shape[1] < p:
        raise ValueError(f"history must supply {p} lags, got {H.shape[1]}")
    return H


def conditional_mean(model: GnariModel, history) -> np.ndarray:
    """``E(X_t | past) = lambda + sum_j A_j X_{t-j}``; ``history`` is N x >=p, latest column last."""
    H = _history(history, model.order.p)
    mean = model.innovation_means.copy()
    for j, A in enumerate(model.thinning_matrices(), start=1):
        mean += A @ H[:, -j]
    return mean


def conditional_variance(model: GnariModel, history) -> np.ndarray:
    """``lambda_i + sum_j sum_m a_{im}(1 - a_{im}) X_{m,t-j}`` with ``a`` the thinning probabilities."""
    H = _history(history, model.order.p)
    var = model.innovation_means.copy()
    for j, A in enumerate(model.thinning_matrices(), start=1):
        var += (A * (1.0 - A)) @ H[:, -j]
    return var


@dataclass(frozen=True)
class ConditionalPmf:
    """One-step conditional law of a node on ``support = 0..K``."""

    support: np.ndarray
    pmf: np.ndarray
    truncated_mass: float


def gnari_conditional_pmf(model: GnariModel, history, node: int, tail_tol: float = 1e-10) -> ConditionalPmf:
    """Conditional pmf of ``X_{i,t}`` given the past.

    Convolves the own-lag Binomial laws, one Poisson-binomial law per
    (lag, stage) pair, and a Poisson innovation truncated where its upper
    tail drops below ``tail_tol``. The result is renormalised.
    """
    if not 0 < tail_tol <= 1e-3:
        raise ValueError("tail_tol must lie in (0, 1e-3]")
    H = _history(history, model.order.p).astype(np.int64)
    net = model.net
    c = model.coefficients
    pmf = np.ones(1)
    for j in range(1, model.order.p + 1):
        lagged = H[:, -j]
        own = c.alpha[node, j - 1]
        pmf = np.convolve(pmf, repeated_poisson_binomial_pmf([own], [lagged[node]]))
        for r, b in enumerate(c.beta[j - 1], start=1):
            nbrs = sorted(net.stage_neighbours(node, r))
            if not nbrs:
                continue
            w = net.stage_weights(node, r)
            probs = [b * w[q] for q in nbrs]
            pmf = np.convolve(pmf, repeated_poisson_binomial_pmf(probs, lagged[nbrs]))
    pois = truncated_poisson_pmf(c.intercept[node], tail_tol)
    kept = pois.sum()
    pmf = np.convolve(pmf, pois)
    pmf /= pmf.sum()
    return ConditionalPmf(np.arange(pmf.size), pmf, float(1.0 - kept))


def gnari_log_likelihood(model: GnariModel, series, tail_tol: float = 1e-10) -> float:
    """Conditional log-likelihood from exact conditional pmfs (slow; evaluation only)."""
    X = series.data if isinstance(series, CountSeries) else np.asarray(series)
    p = model.order.p
    total = 0.0
    for t in range(p, X.shape[1]):
        hist = X[:, t - p : t]
        for i in range(X.shape[0]):
            law = gnari_conditional_pmf(model, hist, i, tail_tol)
            x = X[i, t]
            prob = law.pmf[x] if x < law.pmf.size else 0.0
            total += np.log(prob) if prob > 0 else -np.inf
    return total


def fit_gnari_cls(series, net: Network, order: ModelOrder, tol: float = 1e-8, covariance: bool = True) -> FitResult:
    """Conditional least squares under the GNARI box constraints.

    The unconstrained normal-equation solution is returned as is when it is
    feasible; otherwise it is clipped and refined until the KKT residual is
    at most ``tol``.
    """
    order = order.with_intercept_mode("innovation")
    X = build_design(series, net, order)
    Y = build_target(series, order.p)
    N = net.node_count
    lo, hi = gnari_bounds(order, N)
    b = solve_normal_equations(X, Y)
    method_detail = "normal-equations"
    kkt = 0.0
    if np.any(b < lo) or np.any(b > hi):
        b, kkt = box_lsq(X, Y, lo, hi, tol=tol, start=b)
        b = np.clip(b, lo, hi)
        method_detail = "projected-refinement"
    resid = Y - X @ b
    rss = float(resid @ resid)
    at_bound = bool(np.any(np.isclose(b, lo, atol=1e-12) | np.isclose(b, hi, atol=1e-12)))
    params = ParamVector(b, lo, hi, order.param_names(net.node_ids))
    fit = FitResult(
        kind="gnari",
        method="cls",
        order=order,
        params=params,
        objective=rss,
        converged=kkt <= tol,
        n_obs=Y.size,
        info={"rss": rss, "kkt": kkt, "solver": method_detail, "at_bound": at_bound},
    )
    if covariance:
        try:
            fit.covariance = asymptotic_covariance(fit, series, net, design=X)
            fit.info["covariance_valid"] = not at_bound
        except np.linalg.LinAlgError:
            fit.info["covariance_valid"] = False
    return fit


def model_from_fit(fit: FitResult, net: Network) -> GnariModel:
    lo, hi = gnari_bounds(fit.order, net.node_count)
    return GnariModel(net, fit.order, ParamVector(np.clip(fit.values, lo, hi)))


def sandwich_covariance(D: np.ndarray, variances: np.ndarray, n_time: int = None) -> np.ndarray:
    """``U^-1 R U^-1 / n`` with ``U = D'D / n`` and ``R = D' diag(variances) D / n``.

    ``D`` stacks the mean gradients of every (node, time) observation; the
    per-time normalisation cancels so ``n_time`` only documents intent.
    """
    D = np.asarray(D, dtype=float)
    v = np.asarray(variances, dtype=float)
    n = n_time or 1
    U = D.T @ D / n
    R = (D * v[:, None]).T @ D / n
    Uinv = np.linalg.inv(U)
    return Uinv @ R @ Uinv / n


def asymptotic_covariance(fit: FitResult, series, net: Network, design=None) -> np.ndarray:
    """Plug-in sandwich covariance of the CLS estimate.

    The conditional mean is linear in the coefficients, so the mean
    gradients are the design rows; the meat uses the model's conditional
    variances at the fitted coefficients.
    """
    X = build_design(series, net, fit.order) if design is None else design
    model = model_from_fit(fit, net)
    data = series.data if isinstance(series, CountSeries) else np.asarray(series)
    p = fit.order.p
    n_t = data.shape[1] - p
    var = np.empty((net.node_count, n_t))
    mats = model.thinning_matrices()
    lam = model.innovation_means
    var[:] = lam[:, None]
    for j, A in enumerate(mats, start=1):
        var += (A * (1.0 - A)) @ data[:, p - j : data.shape[1] - j]
    cond = np.linalg.cond(X.T @ X)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError("singular bread matrix in sandwich covariance")
    return sandwich_covariance(X, var.ravel(), n_t)


def gnari_autocovariance(model: GnariModel, h_max: int, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """Autocovariances ``Gamma(h) = Cov(X_t, X_{t-h})`` for ``h = 0..h_max``.

    Solves ``G = A G A' + diag(B mu_Y) + Sigma_e`` for the stacked process by
    fixed-point iteration, then reads ``Gamma(h)`` off the top-left block
    of ``A^h G``.

    Returns
    -------
    ndarray, shape (h_max + 1, N, N)
    """
    if model.stationarity_margin() >= 1:
        raise ValueError("autocovariance requires the sufficient stationarity condition (margin < 1)")
    N, p = model.net.node_count, model.order.p
    A = companion_matrix(model.order, model.params, model.net)
    mu = model.stationary_mean()
    mats = model.thinning_matrices()
    thin_var = sum((Aj * (1.0 - Aj)) @ mu for Aj in mats)
    Q = np.zeros((N * p, N * p))
    Q[:N, :N] = np.diag(thin_var + model.innovation_means)
    G = Q.copy()
    for _ in range(max_iter):
        G_new = A @ G @ A.T + Q
        done = np.max(np.abs(G_new - G)) <= tol * max(1.0, np.max(np.abs(G_new)))
        G = G_new
        if done:
            break
    else:
        raise RuntimeError("autocovariance fixed-point iteration did not converge")
    G = 0.5 * (G + G.T)
    out = np.empty((h_max + 1, N, N))
    Gh = G
    for h in range(h_max + 1):
        out[h] = Gh[:N, :N]
        Gh = A @ Gh
    return out


def predict_gnari(fit, history, horizon: int, net: Network = None) -> np.ndarray:
    """Recursive mean forecasts, ``N x horizon``; accepts a fit or a model."""
    if isinstance(fit, GnariModel):
        return forecast_recursive(fit.order, fit.params, fit.net, history, horizon)
    if net is None:
        raise ValueError("a network is required to forecast from a FitResult")
    return forecast_recursive(fit.order, fit.params, net, history, horizon)
