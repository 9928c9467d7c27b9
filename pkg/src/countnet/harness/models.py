"""Uniform fit/predict entry points keyed by model kind."""

from __future__ import annotations

from ..baselines import PNAR_ORDER, fit_gnar_cls, fit_pnar1, predict_gnar, predict_pnar
from ..design import ModelOrder
from ..gnari import fit_gnari_cls, predict_gnari
from ..ngnar import SOFTPLUS, ResponseFunction, fit_ngnar_cls, fit_ngnar_cmle, predict_ngnar
from ..results import MODEL_KINDS, FitResult

DEFAULT_METHOD = {"gnari": "cls", "gnar": "cls", "ngnar": "cmle", "pnar": "qmle"}


def default_order(kind: str, p: int = 1, local_intercept: bool = False) -> ModelOrder:
    if kind == "pnar":
        return PNAR_ORDER
    mode = "innovation" if kind == "gnari" else "intercept"
    return ModelOrder.simple(p, 1, intercept_mode=mode, local_intercept=local_intercept)


def fit_model(
    kind, series, net, order=None, method=None, response=SOFTPLUS, init=None, config=None, covariance=True
) -> FitResult:
    """Fit ``kind`` with ``method`` (defaults: GNARI/GNAR CLS, NGNAR CMLE, PNAR QMLE).

    ``covariance=False`` skips the GNARI sandwich covariance.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    method = method or DEFAULT_METHOD[kind]
    if isinstance(response, str):
        response = ResponseFunction.parse(response)
    order = order or default_order(kind)
    if kind == "gnari":
        if method != "cls":
            raise ValueError("GNARI is fitted by constrained CLS only")
        return fit_gnari_cls(series, net, order, covariance=covariance)
    if kind == "gnar":
        if method != "cls":
            raise ValueError("GNAR is fitted by CLS only")
        return fit_gnar_cls(series, net, order)
    if kind == "pnar":
        if method != "qmle":
            raise ValueError("PNAR is fitted by QMLE only")
        return fit_pnar1(series, net, config)
    if method == "cls":
        return fit_ngnar_cls(series, net, order, response, config, init=init)
    if method == "cmle":
        return fit_ngnar_cmle(series, net, order, response, config, init=init)
    raise ValueError(f"unknown NGNAR method {method!r}")


def predict(fit: FitResult, history, horizon: int, net):
    if fit.kind == "gnari":
        return predict_gnari(fit, history, horizon, net)
    if fit.kind == "ngnar":
        return predict_ngnar(fit, history, horizon, net)
    if fit.kind == "pnar":
        return predict_pnar(fit, history, horizon, net)
    return predict_gnar(fit, history, horizon, net)
