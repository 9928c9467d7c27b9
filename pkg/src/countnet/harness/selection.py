"""Backward-deletion order selection by BIC.

Starting from every own-lag term and one neighbour stage at each lag up
to ``max_p``, the single term whose removal lowers BIC the most is deleted
until no deletion helps. A term is either an own-lag coefficient
``alpha_j`` or the deepest remaining neighbour stage at lag ``j``.

BIC is ``n log(RSS/n) + k log n`` for least-squares fits and
``-2 loglik + k log n`` for likelihood fits, with ``n = N (T - max_p)``
held fixed so that every candidate is scored on the same rows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..baselines import PNAR_ORDER
from ..design import ModelOrder
from ..ngnar import SOFTPLUS
from .models import DEFAULT_METHOD, fit_model

logger = logging.getLogger(__name__)


def bic(fit, n_obs: int = None) -> float:
    """BIC of a fit; ``n_obs`` overrides the fit's own row count."""
    n = n_obs or fit.n_obs
    k = fit.n_params
    if fit.method == "cls":
        rss = fit.info["rss"]
        return float(n * np.log(rss / n) + k * np.log(n))
    return float(-2.0 * fit.info["loglik"] + k * np.log(n))


def term_indices(order: ModelOrder, n_nodes: int) -> dict:
    """Positions in the flat layout of each deletable term."""
    out = {}
    k = 0
    for j in range(1, order.p + 1):
        if order.alpha_mask[j - 1]:
            width = 1 if order.global_alpha else n_nodes
            out[("alpha", j)] = list(range(k, k + width))
            k += width
        for r in range(1, order.s[j - 1] + 1):
            out[("beta", j, r)] = [k]
            k += 1
    return out


def _drop(order: ModelOrder, term) -> ModelOrder:
    if term[0] == "alpha":
        mask = list(order.alpha_mask)
        mask[term[1] - 1] = 0
        return replace(order, alpha_mask=tuple(mask))
    s = list(order.s)
    s[term[1] - 1] -= 1
    return replace(order, s=tuple(s))


def _candidates(order: ModelOrder):
    """Deletable terms: each included alpha_j and the deepest stage of each lag."""
    terms = [("alpha", j) for j in range(1, order.p + 1) if order.alpha_mask[j - 1]]
    terms += [("beta", j, order.s[j - 1]) for j in range(1, order.p + 1) if order.s[j - 1] > 0]
    return terms


def _label(term) -> str:
    return f"alpha_{term[1]}" if term[0] == "alpha" else f"beta_{term[1]}_{term[2]}"


@dataclass
class SelectionPath:
    order: ModelOrder
    bic: float
    fit: object = None
    steps: list = field(default_factory=list)


def backward_bic_path(
    series,
    net,
    max_p: int,
    kind: str,
    method: str = None,
    response=SOFTPLUS,
    local_intercept: bool = False,
    global_alpha: bool = True,
    ranking: str = "auto",
) -> SelectionPath:
    """Greedy backward deletion; returns the selected order and the deletion path.

    ``ranking="exact"`` refits every candidate. ``"wald"`` ranks candidates
    by their Wald statistic at the current fit and refits only the best
    one (used for likelihood fits, where each refit runs ADAM); a deletion
    is still accepted only if the refitted BIC improves. ``"auto"`` picks
    ``"wald"`` for NGNAR conditional MLE and ``"exact"`` otherwise.
    """
    if max_p < 1:
        raise ValueError("max_p must be >= 1")
    method = method or DEFAULT_METHOD[kind]
    if kind == "pnar":
        fit = fit_model("pnar", series, net)
        return SelectionPath(PNAR_ORDER, bic(fit), fit, [])
    if ranking == "auto":
        ranking = "wald" if (kind == "ngnar" and method == "cmle") else "exact"
    N = net.node_count
    T = series.length if hasattr(series, "length") else np.asarray(series).shape[1]
    n = N * (T - max_p)
    mode = "innovation" if kind == "gnari" else "intercept"
    order = ModelOrder(
        p=max_p,
        s=(1,) * max_p,
        global_alpha=global_alpha,
        intercept_mode=mode,
        local_intercept=local_intercept,
    )

    def fit_order(o, init=None, covariance=False):
        return fit_model(kind, series, net, o, method, response, init=init, covariance=covariance)

    current = fit_order(order)
    current_bic = bic(current, n)
    steps = [{"removed": None, "bic": current_bic, "n_params": current.n_params}]
    while True:
        terms = _candidates(order)
        if not terms:
            break
        idx = term_indices(order, N)
        if ranking == "wald" and current.covariance is not None:
            best = None
            for term in terms:
                sel = idx[term]
                b = current.values[sel]
                V = current.covariance[np.ix_(sel, sel)]
                try:
                    stat = float(b @ np.linalg.solve(V, b))
                except np.linalg.LinAlgError:
                    stat = np.inf
                if best is None or stat < best[0]:
                    best = (stat, term)
            term = best[1]
            keep = np.setdiff1d(np.arange(current.n_params), idx[term])
            new_order = _drop(order, term)
            cand = fit_order(new_order, init=current.values[keep])
            scored = [(bic(cand, n), term, new_order, cand)]
        else:
            scored = []
            for term in terms:
                keep = np.setdiff1d(np.arange(current.n_params), idx[term])
                new_order = _drop(order, term)
                init = current.values[keep] if kind == "ngnar" else None
                try:
                    cand = fit_order(new_order, init=init)
                except np.linalg.LinAlgError:
                    continue
                scored.append((bic(cand, n), term, new_order, cand))
        if not scored:
            break
        scored.sort(key=lambda x: (x[0], _label(x[1])))
        cand_bic, term, new_order, cand = scored[0]
        if cand_bic >= current_bic:
            break
        logger.info("dropping %s: BIC %.3f -> %.3f", _label(term), current_bic, cand_bic)
        order, current, current_bic = new_order, cand, cand_bic
        steps.append({"removed": _label(term), "bic": cand_bic, "n_params": cand.n_params})
    if kind == "gnari":
        current = fit_order(order, covariance=True)
    return SelectionPath(order, current_bic, current, steps)


def backward_bic_select(series, net, max_p: int, kind: str, **kw) -> ModelOrder:
    """Selected :class:`ModelOrder` from :func:`backward_bic_path`."""
    return backward_bic_path(series, net, max_p, kind, **kw).order
