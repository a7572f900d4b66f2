"""Selection and prediction metrics: TPR/FDR, oracle inclusion, OIR, risks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import LassoProblem


@dataclass
class SelectionMetrics:
    tpr: float
    fdr: float
    oracle_inclusive: bool
    oir: float
    support_size: int


def _as_set(s) -> set:
    if isinstance(s, np.ndarray):
        return {int(i) for i in s.ravel()}
    return {int(i) for i in s}


def tpr_fdr(est_support, true_support) -> tuple[float, float]:
    """True positive rate and false discovery rate; 1 and 0 on empty denominators."""
    est, true = _as_set(est_support), _as_set(true_support)
    hits = len(est & true)
    tpr = hits / len(true) if true else 1.0
    fdr = (len(est) - hits) / len(est) if est else 0.0
    return tpr, fdr


def oracle_inclusive(est_support, true_support) -> bool:
    return _as_set(true_support) <= _as_set(est_support)


def oir(s_star, est_support, is_oracle_inclusive: bool) -> float:
    """s* / |S_hat|, or 0 when the estimate misses part of the true model.

    An inclusive estimate is itself a candidate oracle-inclusive model, so
    s* is capped at |S_hat|; this covers penalties off the scan grid.
    """
    if not is_oracle_inclusive:
        return 0.0
    size = len(_as_set(est_support))
    if size == 0:
        return 1.0
    return min(s_star, size) / size


def smallest_oracle_support(X, y, true_support, grid, path=None) -> tuple[float, float | None]:
    """Smallest oracle-inclusive lasso model over a grid of penalties.

    Returns ``(s_star, lambda_star)`` where ``lambda_star`` is the largest
    penalty attaining the minimum size, or ``(inf, None)`` if no grid fit
    contains the true support.
    """
    values = np.asarray(getattr(grid, "values", grid), dtype=float)
    if path is None:
        problem = X if isinstance(X, LassoProblem) else LassoProblem(X, y)
        path = problem.path(values)
    true = _as_set(true_support)
    best, lam_star = math.inf, None
    for lam, fit in zip(values, path):
        if true <= _as_set(fit.active_set) and fit.support_size < best:
            best, lam_star = fit.support_size, float(lam)
    return best, lam_star


def selection_metrics(est_support, true_support, s_star) -> SelectionMetrics:
    tpr, fdr = tpr_fdr(est_support, true_support)
    inc = oracle_inclusive(est_support, true_support)
    return SelectionMetrics(tpr, fdr, inc, oir(s_star, est_support, inc), len(_as_set(est_support)))


def predictive_risk(beta_hat, X_test, y_test) -> float:
    """Mean squared prediction error on held-out rows."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    y_test = np.asarray(y_test, dtype=float).ravel()
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    if X_test.shape != (len(y_test), len(beta_hat)):
        raise DimensionMismatch(f"test design {X_test.shape} incompatible with y {len(y_test)} / beta {len(beta_hat)}")
    r = y_test - X_test @ beta_hat
    return float(r @ r) / len(y_test)


def signal_mse(f_hat, f_true) -> float:
    """||f_hat - f||^2 / N."""
    f_hat = np.asarray(f_hat, dtype=float).ravel()
    f_true = np.asarray(f_true, dtype=float).ravel()
    if f_hat.shape != f_true.shape:
        raise DimensionMismatch("signals differ in length")
    d = f_hat - f_true
    return float(d @ d) / len(d)
