"""Binomial thinning and the discrete laws behind GNARI conditionals.

Every stochastic function takes an explicit ``numpy.random.Generator``;
nothing here touches global RNG state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

# Thinning draws with x <= this use inversion of one uniform.
_INVERSION_MAX = 25


def _check_prob(q, name="q"):
    q = float(q)
    if not 0.0 <= q <= 1.0 or math.isnan(q):
        raise ValueError(f"{name} must lie in [0, 1], got {q}")
    return q


def binomial_thin(q: float, x: int, rng: np.random.Generator) -> int:
    """Draw ``q o x``, the sum of ``x`` independent Bernoulli(q) variables.

    Small ``x`` inverts the Binomial(x, q) cdf at a single uniform; larger
    ``x`` sums explicit Bernoulli draws.
    """
    q = _check_prob(q)
    if x < 0 or int(x) != x:
        raise ValueError(f"x must be a non-negative integer, got {x}")
    x = int(x)
    if x == 0 or q == 0.0:
        return 0
    if q == 1.0:
        return x
    if x <= _INVERSION_MAX:
        u = rng.random()
        p = (1.0 - q) ** x
        cdf = p
        k = 0
        ratio = q / (1.0 - q)
        while u > cdf and k < x:
            p *= ratio * (x - k) / (k + 1)
            k += 1
            cdf += p
        return k
    return int(np.count_nonzero(rng.random(x) < q))


def thin_array(q, x, rng: np.random.Generator) -> np.ndarray:
    """Vectorised thinning: elementwise Binomial(x, q) with broadcasting."""
    q = np.asarray(q, dtype=float)
    x = np.asarray(x)
    if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
        raise ValueError("thinning probabilities must lie in [0, 1]")
    if np.any(x < 0):
        raise ValueError("thinned counts must be non-negative")
    return rng.binomial(x.astype(np.int64), q)


def poisson_binomial_pmf(probs) -> np.ndarray:
    """Exact pmf of a sum of independent Bernoulli(p_k) over ``{0..n}``.

    Built by adding one Bernoulli at a time (O(n^2)).

    Examples
    --------
    >>> poisson_binomial_pmf([0.5, 0.5])
    array([0.25, 0.5 , 0.25])
    """
    probs = np.asarray(probs, dtype=float).ravel()
    if np.any((probs < 0) | (probs > 1)) or np.any(np.isnan(probs)):
        raise ValueError("probabilities must lie in [0, 1]")
    pmf = np.zeros(probs.size + 1)
    pmf[0] = 1.0
    for k, p in enumerate(probs, start=1):
        pmf[1 : k + 1] = pmf[1 : k + 1] * (1.0 - p) + pmf[:k] * p
        pmf[0] *= 1.0 - p
    return pmf


@dataclass(frozen=True)
class PoissonBinomial:
    """Law of a sum of independent, non-identical Bernoulli variables."""

    probs: np.ndarray
    pmf: np.ndarray

    @classmethod
    def from_probs(cls, probs) -> "PoissonBinomial":
        probs = np.asarray(probs, dtype=float).ravel()
        return cls(probs=probs, pmf=poisson_binomial_pmf(probs))

    @property
    def mean(self) -> float:
        return float(self.probs.sum())

    @property
    def variance(self) -> float:
        return float(np.sum(self.probs * (1.0 - self.probs)))

    def convolve(self, other: "PoissonBinomial") -> "PoissonBinomial":
        return PoissonBinomial(
            probs=np.concatenate([self.probs, other.probs]),
            pmf=np.convolve(self.pmf, other.pmf),
        )


def repeated_poisson_binomial_pmf(probs, counts) -> np.ndarray:
    """Poisson-binomial pmf where ``probs[k]`` is repeated ``counts[k]`` times.

    Each repeated block is a Binomial(counts[k], probs[k]) law, so blocks are
    convolved rather than expanded.
    """
    probs = np.asarray(probs, dtype=float).ravel()
    counts = np.asarray(counts).ravel()
    if probs.shape != counts.shape:
        raise ValueError("probs and counts must have the same length")
    if np.any((probs < 0) | (probs > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    if np.any(counts < 0):
        raise ValueError("counts must be non-negative")
    pmf = np.ones(1)
    for p, c in zip(probs, counts):
        c = int(c)
        # scipy's binomial pmf overflows for p near the subnormal range; such a
        # block is a point mass at zero to double precision anyway
        if c == 0 or p < 1e-300:
            continue
        pmf = np.convolve(pmf, stats.binom.pmf(np.arange(c + 1), c, p))
    return pmf


def truncated_poisson_pmf(mean: float, tail_tol: float) -> np.ndarray:
    """Poisson(mean) pmf on ``{0..K}`` with upper tail mass beyond K below ``tail_tol``."""
    if mean < 0:
        raise ValueError(f"mean must be non-negative, got {mean}")
    if mean == 0:
        return np.ones(1)
    K = int(stats.poisson.isf(tail_tol, mean))
    while stats.poisson.sf(K, mean) >= tail_tol:
        K += 1
    return stats.poisson.pmf(np.arange(K + 1), mean)


def poisson_sample(mean: float, rng: np.random.Generator) -> int:
    """One Poisson(mean) draw; ``mean == 0`` returns 0."""
    mean = float(mean)
    if mean < 0 or math.isnan(mean):
        raise ValueError(f"mean must be non-negative, got {mean}")
    if mean == 0:
        return 0
    return int(rng.poisson(mean))


def pmf_moments(pmf) -> tuple:
    """Mean and variance of a pmf supported on ``{0..len-1}``."""
    pmf = np.asarray(pmf, dtype=float)
    k = np.arange(pmf.size)
    m = float(pmf @ k)
    return m, float(pmf @ (k - m) ** 2)
