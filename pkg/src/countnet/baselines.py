"""Comparator models: linear GNAR and linear Poisson network autoregression PNAR(1)."""

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
    forecast_recursive,
    spectral_radius,
)
from .network import Network
from .ngnar import poisson_loglik
from .optimize import OptimizerConfig, SingularDesignError, adam_minimize, solve_normal_equations
from .results import FitResult

logger = logging.getLogger(__name__)

PNAR_ORDER = ModelOrder(p=1, s=(1,), intercept_mode="intercept")
# Poisson means are floored here to keep log(lambda) finite.
LAMBDA_FLOOR = 1e-10


def fit_gnar_cls(series, net: Network, order: ModelOrder) -> FitResult:
    """Unconstrained least squares for the linear GNAR model."""
    if order.intercept_mode == "innovation":
        order = order.with_intercept_mode("intercept")
    X = build_design(series, net, order)
    Y = build_target(series, order.p)
    b = solve_normal_equations(X, Y)
    resid = Y - X @ b
    rss = float(resid @ resid)
    dof = max(Y.size - b.size, 1)
    cov = rss / dof * np.linalg.inv(X.T @ X)
    return FitResult(
        kind="gnar",
        method="cls",
        order=order,
        params=ParamVector(b, names=order.param_names(net.node_ids)),
        objective=rss,
        converged=True,
        n_obs=Y.size,
        covariance=cov,
        info={"rss": rss},
    )


def predict_gnar(fit: FitResult, history, horizon: int, net: Network) -> np.ndarray:
    return forecast_recursive(fit.order, fit.params, net, history, horizon)


@dataclass(frozen=True)
class PnarModel:
    """Linear PNAR(1): ``lambda_t = beta0 + beta1 W X_{t-1} + alpha1 X_{t-1}``.

    ``W`` is the row-normalised adjacency (``1/n_i`` on out-neighbours).
    """

    net: Network
    beta0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        if min(self.beta0, self.alpha1, self.beta1) < 0:
            raise ValueError("PNAR parameters must be non-negative")

    @property
    def G(self) -> np.ndarray:
        return self.beta1 * self.net.weight_matrix(1) + self.alpha1 * np.eye(self.net.node_count)

    def spectral_radius(self) -> float:
        return spectral_radius(self.G)

    def is_stationary(self) -> bool:
        return self.spectral_radius() < 1

    def stationary_mean(self) -> np.ndarray:
        N = self.net.node_count
        return np.linalg.solve(np.eye(N) - self.G, np.full(N, self.beta0))

    @property
    def params(self) -> ParamVector:
        return ParamVector([self.alpha1, self.beta1, self.beta0], names=PNAR_ORDER.param_names(self.net.node_ids))


def simulate_pnar(model: PnarModel, T: int, burn_in: int, rng: np.random.Generator) -> CountSeries:
    """Conditionally independent Poisson draws given the previous step."""
    if burn_in < 0 or T < 1:
        raise ValueError("need T >= 1 and burn_in >= 0")
    if not model.is_stationary():
        warnings.warn("spectral radius of beta1*W + alpha1*I is >= 1", RuntimeWarning)
    N = model.net.node_count
    G = model.G
    total = 1 + burn_in + T
    X = np.zeros((N, total), dtype=np.int64)
    X[:, 0] = rng.poisson(model.beta0, size=N)
    for t in range(1, total):
        X[:, t] = rng.poisson(model.beta0 + G @ X[:, t - 1])
    return CountSeries(X[:, 1 + burn_in :], node_ids=model.net.node_ids)


def _qmle_objective(X, Y, scale, floor_hits):
    n = Y.size
    Xs = X / scale

    def fg(z):
        lam = Xs @ z
        low = lam < LAMBDA_FLOOR
        if np.any(low & (Y > 0)):
            floor_hits[0] += 1
        lam = np.where(low, LAMBDA_FLOOR, lam)
        f = -(Y @ np.log(lam) - lam.sum()) / n
        g = -Xs.T @ (Y / lam - 1.0) / n
        return f, g

    return fg


def fit_pnar1(series, net: Network, config: OptimizerConfig = None) -> FitResult:
    """Poisson quasi-maximum likelihood for PNAR(1) by projected ADAM (all parameters >= 0)."""
    X = build_design(series, net, PNAR_ORDER)
    Y = build_target(series, 1)
    try:
        init = np.clip(solve_normal_equations(X, Y), 0, None)
    except SingularDesignError:
        # Collinear lag and neighbour columns; start from the intercept-only fit.
        init = np.array([0.0, 0.0, Y.mean()])
    if init[-1] <= 0:
        init[-1] = max(1e-3 * Y.mean(), 1e-3)
    scale = np.sqrt(np.mean(X * X, axis=0))
    scale[scale == 0] = 1.0
    base = config or OptimizerConfig()
    cfg = OptimizerConfig(
        step=base.step,
        beta1=base.beta1,
        beta2=base.beta2,
        eps=base.eps,
        max_iter=base.max_iter,
        tol=base.tol,
        lower=np.zeros(3),
        upper=np.full(3, np.inf),
    )
    floor_hits = [0]
    res = adam_minimize(_qmle_objective(X, Y, scale, floor_hits), init * scale, cfg)
    if floor_hits[0]:
        warnings.warn("Poisson mean hit the floor with a positive count; log-likelihood floored", RuntimeWarning)
    b = res.x / scale
    lam = np.maximum(X @ b, LAMBDA_FLOOR)
    return FitResult(
        kind="pnar",
        method="qmle",
        order=PNAR_ORDER,
        params=ParamVector(b, np.zeros(3), np.full(3, np.inf), PNAR_ORDER.param_names(net.node_ids)),
        objective=res.fun * Y.size,
        converged=res.converged,
        n_obs=Y.size,
        info={
            "rss": float(np.sum((Y - lam) ** 2)),
            "loglik": poisson_loglik(Y, lam),
            "grad_norm": res.grad_norm,
            "n_iter": res.n_iter,
            "floor_hits": floor_hits[0],
            "message": res.message,
        },
    )


def predict_pnar(fit: FitResult, history, horizon: int, net: Network) -> np.ndarray:
    """Recursive PNAR(1) mean forecasts; the first column is ``lambda_{n+1}``."""
    return forecast_recursive(fit.order, fit.params, net, history, horizon)
