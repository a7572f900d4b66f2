"""Noise-variance estimators: the residual formula and refitted cross validation."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreesOfFreedomExhausted, InsufficientData
from .model import _as_design, _as_response, refit_least_squares
from .selectors import select_cv, select_scaled_lasso

RCV_MIN_ROWS = 20


@dataclass
class VarianceEstimate:
    sigma2: float
    method: str
    k_used: int | tuple
    details: dict = field(default_factory=dict)

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))


def residual_variance(X, y, beta, k: int) -> VarianceEstimate:
    """||y - X beta||^2 / (N - k)."""
    design = _as_design(X)
    y = _as_response(y, design.n)
    n = design.n
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k >= n:
        raise DegreesOfFreedomExhausted(f"k={k} leaves no residual degrees of freedom (N={n})")
    r = y - design.values @ np.asarray(beta, dtype=float)
    return VarianceEstimate(float(r @ r) / (n - k), "residual", int(k))


def rcv_split(n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Uniformly random halves of sizes floor(n/2) and ceil(n/2)."""
    perm = np.random.default_rng(seed).permutation(n)
    h = n // 2
    return np.sort(perm[:h]), np.sort(perm[h:])


def _select(X, y, inner, seed, folds):
    if inner == "cv":
        return select_cv(X, y, folds=folds, seed=seed).support
    if inner == "scaled_lasso":
        return select_scaled_lasso(X, y).support
    raise ValueError(f"unknown inner selector {inner!r}")


def rcv_variance(X, y, seed=0, inner_selector: str = "cv", folds: int = 10, split=None) -> VarianceEstimate:
    """Refitted cross-validation estimate of sigma^2.

    A model is selected by lasso + ``inner_selector`` on each half, refitted
    by least squares on the other half, and the two residual-formula
    estimates (k = selected size) are averaged. Both halves use the same
    inner CV seed, so swapping the halves leaves the result unchanged.

    If a selected model leaves no residual degrees of freedom on the other
    half, that half falls back to k = 0 and ``details['fallback']`` records it.
    """
    design = _as_design(X)
    y = _as_response(y, design.n)
    n = design.n
    if n < RCV_MIN_ROWS:
        raise InsufficientData(f"RCV needs at least {RCV_MIN_ROWS} rows, got {n}")
    halves = rcv_split(n, seed) if split is None else tuple(np.asarray(h, dtype=int) for h in split)
    if len(halves) != 2:
        raise ValueError("split must contain exactly two index sets")
    inner_seed = np.random.SeedSequence(seed, spawn_key=(1,)).generate_state(1)[0] if split is None else seed
    Xv = design.values

    models = [_select(Xv[h], y[h], inner_selector, inner_seed, folds) for h in halves]
    estimates, ks, fallback = [], [], []
    for model, other in zip(models, halves[::-1]):
        Xo, yo = Xv[other], y[other]
        beta = refit_least_squares(Xo, yo, model)
        k = len(model)
        if k >= len(other):
            warnings.warn(
                f"RCV: selected model of size {k} exhausts the {len(other)} rows of the other half; using k=0",
                stacklevel=2,
            )
            k = 0
            fallback.append(True)
        else:
            fallback.append(False)
        estimates.append(residual_variance(Xo, yo, beta, k).sigma2)
        ks.append(k)
    return VarianceEstimate(
        float(np.mean(estimates)),
        "rcv",
        tuple(ks),
        details={
            "half_estimates": estimates,
            "model_sizes": [len(m) for m in models],
            "fallback": fallback,
            "inner_selector": inner_selector,
        },
    )
