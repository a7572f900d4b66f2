"""Quantile universal threshold (QUT) by Monte Carlo, and closed-form references.

Under the null model Y ~ N(0, I_N) the lasso returns the zero vector exactly
when ``lam >= ||X^T Y||_inf``. QUT picks ``lam`` as sigma times the
(1 - alpha_P) quantile of that statistic, with alpha_P = 1/sqrt(pi log P).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimension, TooFewReplicates
from .model import _as_design

DEFAULT_M = 1000
MIN_M = 100
ALPHA_CAP = 0.5
# replicates drawn per RNG substream; fixed so the sample does not depend on
# how the work is split across workers
CHUNK = 1000


@dataclass
class NullQuantileEstimate:
    lambda_qut: float
    alpha: float
    m: int
    seed: int
    sigma: float
    quantile: float
    samples: np.ndarray | None = None


def alpha_p(P: float) -> float:
    """1/sqrt(pi * ln P), capped at 0.5. Accepts non-integer P for checks."""
    if P < 2:
        raise InvalidDimension(f"alpha_P needs P >= 2, got {P}")
    return min(1.0 / math.sqrt(math.pi * math.log(P)), ALPHA_CAP)


def order_statistic_index(alpha: float, m: int) -> int:
    """0-based index of the ceil((1 - alpha) m)-th smallest sample."""
    # rounding guards against (1 - alpha) * m landing a hair above an integer
    k = math.ceil(round((1.0 - alpha) * m, 9))
    return min(max(k, 1), m) - 1


def empirical_quantile(samples: np.ndarray, alpha: float) -> float:
    s = np.sort(np.asarray(samples, dtype=float))
    return float(s[order_statistic_index(alpha, len(s))])


def null_statistic_samples(X, m: int, seed: int) -> np.ndarray:
    """Draws of ||X^T y||_inf for y ~ N(0, I_N), m replicates.

    Replicates are generated in blocks of ``CHUNK``; block ``b`` uses the
    substream ``SeedSequence(seed, spawn_key=(b,))``.
    """
    design = _as_design(X)
    Xk = design.values[:, ~design.constant]
    n = design.n
    out = np.empty(m)
    for b, start in enumerate(range(0, m, CHUNK)):
        size = min(CHUNK, m - start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        # one row per replicate, so a shorter run's draws are a prefix of a longer one's
        Y = rng.standard_normal((size, n))
        out[start:start + size] = np.abs(Y @ Xk).max(axis=1)
    return out


def qut_monte_carlo(X, sigma: float = 1.0, m: int = DEFAULT_M, seed: int = 0,
                    alpha: float | None = None, keep_samples: bool = True) -> NullQuantileEstimate:
    """Monte Carlo estimate of the quantile universal threshold.

    Parameters
    ----------
    X : DesignMatrix or array (N, P)
    sigma : float
        Noise standard deviation; multiplies the unit-variance null quantile.
    m : int
        Number of null replicates (at least 100).
    seed : int
    alpha : float, optional
        Override for the level; defaults to ``alpha_p(P)``.
    """
    if m < MIN_M:
        raise TooFewReplicates(f"need at least {MIN_M} Monte Carlo replicates, got {m}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    design = _as_design(X)
    if alpha is None:
        alpha = alpha_p(max(design.p, 2))
    samples = null_statistic_samples(design, m, seed)
    q = empirical_quantile(samples, alpha)
    return NullQuantileEstimate(
        lambda_qut=sigma * q,
        alpha=alpha,
        m=m,
        seed=seed,
        sigma=sigma,
        quantile=q,
        samples=samples if keep_samples else None,
    )


def universal_threshold(n: int, sigma: float = 1.0) -> float:
    """sigma * sqrt(2 ln N): the orthonormal-design limit of QUT."""
    return sigma * math.sqrt(2.0 * math.log(n))


def qut_l0_reference(n: float) -> float:
    """2 ln N, the best-subset counterpart of QUT; exceeds the BIC penalty ln N."""
    if n < 2:
        raise InvalidDimension("N must be at least 2")
    return 2.0 * math.log(n)
