"""Fit results shared by every model, with a JSON-friendly form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import ModelOrder, ParamVector

MODEL_KINDS = ("gnari", "ngnar", "gnar", "pnar")


@dataclass
class FitResult:
    """Estimated coefficients plus estimation metadata.

    Attributes
    ----------
    kind : {"gnari", "ngnar", "gnar", "pnar"}
    method : str
        ``"cls"``, ``"cmle"`` or ``"qmle"``.
    objective : float
        Value of the minimised criterion (residual sum of squares, or
        negative log-likelihood).
    info : dict
        Solver diagnostics: ``rss``, ``loglik`` (Poisson, when defined),
        ``grad_norm``/``kkt``, ``n_iter``, ``at_bound``...
    """

    kind: str
    method: str
    order: ModelOrder
    params: ParamVector
    objective: float
    converged: bool
    n_obs: int
    covariance: np.ndarray = None
    response: str = None
    info: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.params.values

    @property
    def n_params(self) -> int:
        return self.params.values.size

    def standard_errors(self) -> np.ndarray:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def to_dict(self) -> dict:
        def _num(x):
            return None if x is None or not np.isfinite(x) else float(x)

        return {
            "kind": self.kind,
            "method": self.method,
            "response": self.response,
            "order": self.order.to_dict(),
            "parameters": [
                {"name": n, "value": float(v), "lower": _num(lo), "upper": _num(hi)}
                for n, v, lo, hi in zip(self.params.names, self.params.values, self.params.lower, self.params.upper)
            ],
            "objective": float(self.objective),
            "converged": bool(self.converged),
            "n_obs": int(self.n_obs),
            "covariance": None if self.covariance is None else np.asarray(self.covariance).tolist(),
            "info": {k: _jsonable(v) for k, v in self.info.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        ps = d["parameters"]
        params = ParamVector(
            values=[p["value"] for p in ps],
            lower=[-np.inf if p["lower"] is None else p["lower"] for p in ps],
            upper=[np.inf if p["upper"] is None else p["upper"] for p in ps],
            names=[p["name"] for p in ps],
        )
        cov = d.get("covariance")
        return cls(
            kind=d["kind"],
            method=d["method"],
            order=ModelOrder.from_dict(d["order"]),
            params=params,
            objective=d["objective"],
            converged=d["converged"],
            n_obs=d["n_obs"],
            covariance=None if cov is None else np.asarray(cov, dtype=float),
            response=d.get("response"),
            info=dict(d.get("info", {})),
        )


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v
