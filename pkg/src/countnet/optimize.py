"""Shared numerical optimisation: ADAM, normal equations, box-constrained LS.

All routines are deterministic and full-batch. Objectives are passed as a
single callable returning ``(value, gradient)``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

logger = logging.getLogger(__name__)

# Condition-number ceiling for the column-equilibrated normal matrix.
COND_LIMIT = 1e12
# Above this condition number the normal equations are solved through QR.
CHOLESKY_COND = 1e8


class OptimizationError(FloatingPointError):
    """Non-finite objective or gradient encountered during optimisation."""


class SingularDesignError(np.linalg.LinAlgError):
    """Design matrix is rank deficient or too ill-conditioned to solve.

    Attributes
    ----------
    columns : list of int
        Indices of the columns involved in the near-dependence.
    condition : float
    """

    def __init__(self, message, columns=(), condition=np.inf):
        super().__init__(message)
        self.columns = list(columns)
        self.condition = condition


@dataclass(frozen=True)
class OptimizerConfig:
    """ADAM settings.

    The defaults (step 0.01, decays 0.9/0.999, epsilon 1e-8) are the usual
    ADAM values; ``tol`` applies to the infinity norm of the projected
    gradient.
    """

    step: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_iter: int = 50_000
    tol: float = 1e-6
    lower: np.ndarray = None
    upper: np.ndarray = None
    monotone: bool = False

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("moment decays must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    converged: bool
    n_iter: int
    trace: np.ndarray = field(repr=False, default=None)
    message: str = ""

    def write_trace_csv(self, path) -> None:
        """Write ``iteration,objective,grad_norm`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "objective", "grad_norm"])
            for it, f, g in self.trace:
                w.writerow([int(it), repr(float(f)), repr(float(g))])


def _bounds(config, n):
    lo = np.full(n, -np.inf) if config.lower is None else np.asarray(config.lower, float)
    hi = np.full(n, np.inf) if config.upper is None else np.asarray(config.upper, float)
    return lo, hi


def projected_gradient(x, g, lo, hi) -> np.ndarray:
    """``x - P(x - g)``: zero exactly at first-order KKT points of the box problem."""
    return x - np.clip(x - g, lo, hi)


def adam_minimize(fun_and_grad, x0, config: OptimizerConfig = None) -> OptimizeResult:
    """Minimise with bias-corrected ADAM, projecting onto the box after each step.

    With ``config.monotone`` a step that increases the objective is rejected
    and the step size halved, so the recorded trace of accepted iterates is
    non-increasing.

    Returns
    -------
    OptimizeResult
        ``trace`` has one ``(iteration, objective, grad_norm)`` row per
        accepted iterate.
    """
    config = config or OptimizerConfig()
    x = np.asarray(x0, dtype=float).copy()
    lo, hi = _bounds(config, x.size)
    x = np.clip(x, lo, hi)
    f, g = fun_and_grad(x)
    _check_finite(f, g, 0)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    lr = config.step
    b1, b2 = config.beta1, config.beta2
    gnorm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
    trace = [(0, f, gnorm)]
    converged = gnorm <= config.tol
    it = 0
    t = 0
    while not converged and it < config.max_iter:
        it += 1
        t += 1
        m_new = b1 * m + (1 - b1) * g
        v_new = b2 * v + (1 - b2) * g * g
        mhat = m_new / (1 - b1**t)
        vhat = v_new / (1 - b2**t)
        x_new = np.clip(x - lr * mhat / (np.sqrt(vhat) + config.eps), lo, hi)
        f_new, g_new = fun_and_grad(x_new)
        _check_finite(f_new, g_new, it)
        if config.monotone and f_new > f:
            lr *= 0.5
            if lr < 1e-16:
                break
            t -= 1
            continue
        x, f, g, m, v = x_new, f_new, g_new, m_new, v_new
        gnorm = float(np.max(np.abs(projected_gradient(x, g, lo, hi)), initial=0.0))
        trace.append((it, f, gnorm))
        converged = gnorm <= config.tol
    msg = "converged" if converged else f"stopped after {it} iterations, gradient norm {gnorm:.3e}"
    if not converged:
        logger.warning("ADAM did not converge: %s", msg)
    return OptimizeResult(
        x=x, fun=float(f), grad_norm=gnorm, converged=converged, n_iter=it, trace=np.array(trace), message=msg
    )


def _check_finite(f, g, it):
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizationError(f"non-finite objective or gradient at iteration {it} (objective={f})")


def _column_scales(X):
    s = np.sqrt(np.mean(X * X, axis=0))
    s[s == 0] = 1.0
    return s


def _dependent_columns(Xs, k=None):
    # Columns loading on the smallest right singular vector.
    _, sv, vt = np.linalg.svd(Xs, full_matrices=False)
    v = np.abs(vt[-1])
    return np.flatnonzero(v > 0.1 * v.max()).tolist(), sv


def solve_normal_equations(X, Y, cond_limit: float = COND_LIMIT):
    """Least-squares solution of ``X^T X b = X^T Y`` on the equilibrated design.

    Well-conditioned systems (condition number up to ``CHOLESKY_COND``)
    are solved by Cholesky with one step of iterative refinement; worse
    ones fall back to a QR factorisation of the design itself.

    Raises
    ------
    SingularDesignError
        When the condition number of the equilibrated ``X^T X`` exceeds
        ``cond_limit``; the error lists the near-dependent columns.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError(f"shape mismatch: X {X.shape}, Y {Y.shape}")
    if X.shape[1] == 0:
        return np.zeros(0)
    if X.shape[0] < X.shape[1]:
        raise SingularDesignError(
            f"{X.shape[0]} rows for {X.shape[1]} columns", columns=range(X.shape[1])
        )
    scale = _column_scales(X)
    Xs = X / scale
    G = Xs.T @ Xs
    ev = np.linalg.eigvalsh(G)
    cond = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
    if not np.isfinite(cond) or cond > cond_limit:
        cols, _ = _dependent_columns(Xs)
        raise SingularDesignError(
            f"normal equations are singular or ill-conditioned (cond={cond:.3g}); "
            f"near-dependent columns: {cols}",
            columns=cols,
            condition=cond,
        )
    if cond <= CHOLESKY_COND:
        factor = linalg.cho_factor(G)
        z = linalg.cho_solve(factor, Xs.T @ Y)
        z += linalg.cho_solve(factor, Xs.T @ (Y - Xs @ z))
    else:
        Q, R = linalg.qr(Xs, mode="economic")
        z = linalg.solve_triangular(R, Q.T @ Y)
    return z / scale


def box_lsq(X, Y, lower, upper, tol: float = 1e-8, max_iter: int = 500, start=None):
    """Minimise ``||Y - X b||^2`` subject to ``lower <= b <= upper``.

    Starts from the clipped unconstrained solution and alternates projected
    gradient steps with exact solves on the free coordinates until the
    first-order KKT residual is at most ``tol``. The residual is measured in
    column-equilibrated coordinates on the per-row mean objective.

    Returns
    -------
    b : ndarray
    kkt : float
        Final KKT residual.

    ``start`` (the unconstrained solution, if already known) skips the
    initial normal-equation solve.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, k = X.shape
    scale = _column_scales(X)
    A = X / scale
    lo = np.asarray(lower, float) * scale
    hi = np.asarray(upper, float) * scale
    b0 = solve_normal_equations(X, Y) if start is None else np.asarray(start, float)
    z = np.clip(b0 * scale, lo, hi)
    H = A.T @ A / n
    c = A.T @ Y / n
    L = np.linalg.eigvalsh(H).max()

    def obj(z):
        return 0.5 * z @ H @ z - c @ z

    kkt = np.inf
    for _ in range(max_iter):
        g = H @ z - c
        kkt = float(np.max(np.abs(projected_gradient(z, g, lo, hi)), initial=0.0))
        if kkt <= tol:
            break
        at_lo = (z <= lo) & (g > 0)
        at_hi = (z >= hi) & (g < 0)
        free = ~(at_lo | at_hi)
        target = z.copy()
        if free.any():
            rhs = c[free] - H[np.ix_(free, ~free)] @ z[~free]
            target[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
        f0 = obj(z)
        step = 1.0
        moved = False
        while step > 1e-12:
            cand = np.clip(z + step * (target - z), lo, hi)
            if obj(cand) < f0 - 1e-18 * abs(f0):
                z = cand
                moved = True
                break
            step *= 0.5
        if not moved:
            cand = np.clip(z - g / L, lo, hi)
            if obj(cand) >= f0:
                break
            z = cand
    # Unscaling can step one ulp outside the box.
    return np.clip(z / scale, lower, upper), kkt


def finite_diff_grad_check(f, grad, x, h: float = 1e-6) -> float:
    """Worst per-coordinate relative error of ``grad`` against central differences.

    The step for coordinate ``k`` is ``h * max(1, |x_k|)``.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(grad(x), dtype=float)
    worst = 0.0
    for k in range(x.size):
        hk = h * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = hk
        num = (f(x + e) - f(x - e)) / (2 * hk)
        denom = max(abs(num), 1e-12)
        worst = max(worst, abs(g[k] - num) / denom)
    return worst
