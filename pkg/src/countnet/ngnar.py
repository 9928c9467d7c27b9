"""Poisson-NGNAR: GNAR linear predictors passed through a response function.

``X_{i,t} | past ~ Poisson(g(eta_{i,t}))`` where ``eta`` is the shared
network linear predictor with an additive intercept ``alpha_{i,0}``.
Coefficients are unconstrained, so negative network effects are allowed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import special

from .design import (
    CountSeries,
    ModelOrder,
    ParamVector,
    build_design,
    build_target,
    forecast_recursive,
    lag_matrices,
    pack,
    stationarity_margin,
    unpack,
)
from .gnari import sandwich_covariance
from .network import Network
from .optimize import OptimizerConfig, adam_minimize, solve_normal_equations
from .results import FitResult

logger = logging.getLogger(__name__)

# exp(x) is refused above this argument rather than returning inf.
EXP_CAP = 700.0
# softplus switches to x + log1p(exp(-cx))/c above this value of c*x.
_SOFTPLUS_LINEAR = 30.0

RESPONSE_KINDS = ("identity", "exponential", "relu", "softplus")


class ResponseSaturationError(OverflowError):
    """The exponential response was asked for exp(x) with x above ``EXP_CAP``."""


@dataclass(frozen=True)
class ResponseFunction:
    """Response ``g`` mapping the linear predictor to the conditional mean.

    Examples
    --------
    >>> round(float(ResponseFunction("softplus").apply(0.0)), 6)
    0.693147
    """

    kind: str = "softplus"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in RESPONSE_KINDS:
            raise ValueError(f"unknown response {self.kind!r}; expected one of {RESPONSE_KINDS}")
        if self.kind == "softplus" and not self.c > 0:
            raise ValueError("softplus sharpness c must be positive")

    @property
    def positive(self) -> bool:
        return self.kind in ("softplus", "exponential")

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "exponential":
            if np.any(x > EXP_CAP):
                raise ResponseSaturationError(f"exp({float(np.max(x)):.4g}) exceeds the cap exp({EXP_CAP})")
            return np.exp(x)
        cx = self.c * x
        big = cx > _SOFTPLUS_LINEAR
        out = np.empty_like(cx)
        out[big] = x[big] + np.log1p(np.exp(-cx[big])) / self.c
        out[~big] = np.log1p(np.exp(cx[~big])) / self.c
        return out

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "relu":
            return (x > 0).astype(float)
        if self.kind == "exponential":
            return self.apply(x)
        return special.expit(self.c * x)

    def __str__(self):
        return f"softplus:{self.c:g}" if self.kind == "softplus" else self.kind

    @classmethod
    def parse(cls, text: str) -> "ResponseFunction":
        """Parse ``"softplus"``, ``"softplus:2"``, ``"identity"``..."""
        kind, _, c = str(text).strip().lower().partition(":")
        kind = {"exp": "exponential"}.get(kind, kind)
        return cls(kind, float(c)) if c else cls(kind)


SOFTPLUS = ResponseFunction("softplus", 1.0)
IDENTITY = ResponseFunction("identity")


@dataclass
class NgnarModel:
    """Poisson-NGNAR process on a fixed network."""

    net: Network
    order: ModelOrder
    params: ParamVector
    response: ResponseFunction = SOFTPLUS

    def __post_init__(self):
        if self.order.intercept_mode == "innovation":
            self.order = self.order.with_intercept_mode("intercept")
        vals = self.params.values if isinstance(self.params, ParamVector) else np.asarray(self.params, float)
        if vals.size != self.order.n_params(self.net.node_count):
            raise ValueError("parameter length does not match the model order")
        self.params = ParamVector(vals, names=self.order.param_names(self.net.node_ids))

    @classmethod
    def from_coefficients(cls, net, alpha, beta, alpha0, response=SOFTPLUS, order=None) -> "NgnarModel":
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        if order is None:
            order = ModelOrder(
                p=alpha.shape[-1],
                s=tuple(len(b) for b in beta),
                global_alpha=alpha.ndim == 1,
                intercept_mode="intercept",
                local_intercept=np.ndim(alpha0) > 0,
            )
        return cls(net, order, ParamVector(pack(order, alpha, beta, alpha0, net.node_count)), response)

    @property
    def coefficients(self):
        return unpack(self.order, self.params.values, self.net.node_count)

    def stationarity_margin(self) -> float:
        return stationarity_margin(self.order, self.params, self.net.node_count)


def simulate_ngnar(model: NgnarModel, T: int, burn_in: int, rng: np.random.Generator, initial=None) -> CountSeries:
    """Simulate ``T`` observations after ``burn_in`` discarded steps.

    Starting lags are Poisson(g(alpha_{i,0})) draws unless ``initial``
    (N x p, oldest first) is given.
    """
    if burn_in < 0 or T < 1:
        raise ValueError("need T >= 1 and burn_in >= 0")
    N, p = model.net.node_count, model.order.p
    g = model.response.apply
    c = model.coefficients
    mats = lag_matrices(model.order, model.params, model.net)
    total = p + burn_in + T
    X = np.zeros((N, total), dtype=np.int64)
    if initial is None:
        start = g(c.intercept)
        if not np.all(np.isfinite(start)) or np.any(start < 0):
            raise FloatingPointError(f"invalid initial mean {start}")
        X[:, :p] = rng.poisson(start[:, None], size=(N, p))
    else:
        X[:, :p] = np.asarray(initial, dtype=np.int64).reshape(N, p)
    for t in range(p, total):
        eta = c.intercept.copy()
        for j, A in enumerate(mats, start=1):
            eta += A @ X[:, t - j]
        mean = g(eta)
        if not np.all(np.isfinite(mean)) or np.any(mean < 0):
            raise FloatingPointError(f"invalid conditional mean at step {t}: {mean}")
        X[:, t] = rng.poisson(mean)
    return CountSeries(X[:, p + burn_in :], node_ids=model.net.node_ids)


def cls_objective(beta, X, Y, response: ResponseFunction):
    """``||Y - g(X beta)||^2`` and its gradient ``-2 X'[(Y - g) * g']``."""
    eta = X @ beta
    r = Y - response.apply(eta)
    return float(r @ r), -2.0 * X.T @ (r * response.grad(eta))


def nll_objective(beta, X, Y, response: ResponseFunction):
    """Poisson negative log-likelihood (without ``log Y!``) and its gradient."""
    eta = X @ beta
    mu = response.apply(eta)
    if np.any(mu <= 0):
        raise FloatingPointError("non-positive Poisson mean; use a strictly positive response")
    return float(-(Y @ np.log(mu) - mu.sum())), -X.T @ ((Y / mu - 1.0) * response.grad(eta))


def poisson_loglik(Y, mu) -> float:
    """Full Poisson log-likelihood including ``-log Y!``."""
    Y = np.asarray(Y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(Y > 0, Y * np.log(mu), 0.0) - mu - special.gammaln(Y + 1)
    return float(terms.sum())


def _scaled(objective, X, Y, response, scale):
    n = Y.size
    Xs = X / scale

    def fg(z):
        f, g = objective(z, Xs, Y, response)
        return f / n, g / n

    return fg


def _column_rms(X):
    s = np.sqrt(np.mean(X * X, axis=0))
    s[s == 0] = 1.0
    return s


def _run(objective, X, Y, response, init, config, multistart, rng_seed):
    scale = _column_rms(X)
    fg = _scaled(objective, X, Y, response, scale)
    starts = [init * scale]
    rng = np.random.default_rng(rng_seed)
    for _ in range(multistart):
        starts.append(starts[0] + rng.normal(scale=0.1 * (np.abs(starts[0]) + 1.0)))
    best = None
    for z0 in starts:
        res = adam_minimize(fg, z0, config)
        if best is None or res.fun < best.fun:
            best = res
    return best, best.x / scale


def fit_ngnar_cls(
    series,
    net: Network,
    order: ModelOrder,
    response: ResponseFunction = SOFTPLUS,
    config: OptimizerConfig = None,
    multistart: int = 0,
    init=None,
) -> FitResult:
    """Conditional least squares by ADAM, started at the normal-equation solution.

    ADAM runs on the per-observation mean objective in column-scaled
    coordinates; convergence means a gradient infinity norm of at most
    ``config.tol`` there. ``multistart`` adds jittered restarts.
    """
    order = order.with_intercept_mode("intercept") if order.intercept_mode == "innovation" else order
    X = build_design(series, net, order)
    Y = build_target(series, order.p)
    b0 = solve_normal_equations(X, Y) if init is None else np.asarray(init, dtype=float)
    res, b = _run(cls_objective, X, Y, response, b0, config, multistart, 0)
    eta = X @ b
    mu = response.apply(eta)
    rss = float(np.sum((Y - mu) ** 2))
    fit = FitResult(
        kind="ngnar",
        method="cls",
        order=order,
        params=ParamVector(b, names=order.param_names(net.node_ids)),
        objective=rss,
        converged=res.converged,
        n_obs=Y.size,
        response=str(response),
        info={
            "rss": rss,
            "loglik": poisson_loglik(Y, mu) if np.all(mu > 0) else None,
            "grad_norm": res.grad_norm,
            "n_iter": res.n_iter,
            "message": res.message,
        },
    )
    try:
        D = X * response.grad(eta)[:, None]
        fit.covariance = sandwich_covariance(D, np.clip(mu, 0, None), Y.size // net.node_count)
    except np.linalg.LinAlgError:
        pass
    return fit


def fit_ngnar_cmle(
    series,
    net: Network,
    order: ModelOrder,
    response: ResponseFunction = SOFTPLUS,
    config: OptimizerConfig = None,
    multistart: int = 0,
    init=None,
) -> FitResult:
    """Poisson conditional maximum likelihood by ADAM, started from the CLS fit."""
    if not response.positive:
        raise ValueError(f"conditional MLE needs a strictly positive response, got {response}")
    order = order.with_intercept_mode("intercept") if order.intercept_mode == "innovation" else order
    X = build_design(series, net, order)
    Y = build_target(series, order.p)
    if init is None:
        init = fit_ngnar_cls(series, net, order, response, config).values
    res, b = _run(nll_objective, X, Y, response, np.asarray(init, float), config, multistart, 1)
    eta = X @ b
    mu = response.apply(eta)
    loglik = poisson_loglik(Y, mu)
    fit = FitResult(
        kind="ngnar",
        method="cmle",
        order=order,
        params=ParamVector(b, names=order.param_names(net.node_ids)),
        objective=res.fun * Y.size,
        converged=res.converged,
        n_obs=Y.size,
        response=str(response),
        info={
            "rss": float(np.sum((Y - mu) ** 2)),
            "loglik": loglik,
            "grad_norm": res.grad_norm,
            "n_iter": res.n_iter,
            "message": res.message,
        },
    )
    try:
        gp = response.grad(eta)
        fisher = (X * (gp * gp / mu)[:, None]).T @ X
        fit.covariance = np.linalg.inv(fisher)
    except np.linalg.LinAlgError:
        pass
    return fit


def predict_ngnar(fit, history, horizon: int, net: Network = None) -> np.ndarray:
    """Recursive mean forecasts ``g(eta)``, ``N x horizon``; accepts a fit or a model."""
    if isinstance(fit, NgnarModel):
        return forecast_recursive(fit.order, fit.params, fit.net, history, horizon, link=fit.response.apply)
    if net is None:
        raise ValueError("a network is required to forecast from a FitResult")
    rf = ResponseFunction.parse(fit.response or "softplus")
    return forecast_recursive(fit.order, fit.params, net, history, horizon, link=rf.apply)
