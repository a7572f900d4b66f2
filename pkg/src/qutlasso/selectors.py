"""Threshold-selection rules for the lasso: k-fold CV, BIC, SURE, scaled lasso, QUT.

Grid-based rules fit the lasso along a descending geometric grid and pick the
grid point minimizing their criterion; ties go to the larger penalty. Every
rule finishes with a least-squares refit on the selected support.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceWarning, InvalidFolds, SigmaCollapse
from .model import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LassoFit,
    LassoProblem,
    _as_design,
    _as_response,
    design_rank,
    refit_least_squares,
)
from .thresholds import DEFAULT_M, qut_monte_carlo

DEFAULT_GRID_SIZE = 100
DEFAULT_GRID_EPS = 1e-3
SIGMA_FLOOR = 1e-8


@dataclass
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) == 0:
            raise ValueError("grid must be a non-empty vector")
        if np.any(self.values <= 0) or np.any(np.diff(self.values) >= 0):
            raise ValueError("grid must be strictly decreasing and positive")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass
class SelectionOutcome:
    rule: str
    lam: float
    support: np.ndarray
    beta_refit: np.ndarray
    sigma_used: float | None = None
    beta_lasso: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def support_size(self) -> int:
        return len(self.support)


def lambda_grid(X, y=None, n_lambda: int = DEFAULT_GRID_SIZE, eps: float = DEFAULT_GRID_EPS,
                lambda_min: float | None = None) -> LambdaGrid:
    """Geometric grid from lambda_max(X, y) down to eps * lambda_max.

    ``lambda_min``, if given and smaller, lowers the bottom of the grid; useful
    when the signal is so strong that eps * lambda_max sits above the noise.
    """
    problem = X if isinstance(X, LassoProblem) else LassoProblem(X, y)
    lmax = problem.lambda_max
    if lmax <= 0:
        raise ValueError("response is orthogonal to every column; no nontrivial grid")
    low = eps * lmax
    if lambda_min is not None and 0 < lambda_min < low:
        low = lambda_min
    return LambdaGrid(np.geomspace(lmax, low, n_lambda))


def _outcome(rule, problem: LassoProblem, fit: LassoFit, sigma=None, **diagnostics) -> SelectionOutcome:
    support = fit.active_set
    return SelectionOutcome(
        rule=rule,
        lam=fit.lam,
        support=support,
        beta_refit=refit_least_squares(problem.design, problem.y, support),
        sigma_used=sigma,
        beta_lasso=fit.beta,
        diagnostics=diagnostics,
    )


def _prepare(X, y, grid):
    problem = X if isinstance(X, LassoProblem) else LassoProblem(X, y)
    if grid is None:
        grid = lambda_grid(problem)
    elif not isinstance(grid, LambdaGrid):
        grid = LambdaGrid(grid)
    return problem, grid


def cv_folds(n: int, folds: int, seed) -> list[np.ndarray]:
    """Seeded partition of range(n) into ``folds`` near-equal test folds."""
    if folds < 2:
        raise InvalidFolds("need at least 2 folds")
    if n < folds:
        raise InvalidFolds(f"{folds} folds need at least {folds} rows, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, folds)]


def select_cv(X, y=None, grid=None, folds: int = 10, seed=0, tol: float = DEFAULT_TOL) -> SelectionOutcome:
    """k-fold cross validation, minimum mean held-out squared error."""
    problem, grid = _prepare(X, y, grid)
    Xv, yv = problem.X, problem.y
    n = len(yv)
    parts = cv_folds(n, folds, seed)
    errors = np.empty((folds, len(grid)))
    for i, test in enumerate(parts):
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        if len(train) == 0:
            raise InvalidFolds("a fold left no training rows")
        sub = LassoProblem(Xv[train], yv[train])
        for g, fit in enumerate(sub.path(grid.values, tol=tol)):
            r = yv[test] - Xv[test] @ fit.beta
            errors[i, g] = float(r @ r) / len(test)
    curve = errors.mean(axis=0)
    best = int(np.argmin(curve))
    fit = problem.path(grid.values[: best + 1], tol=tol)[-1]
    return _outcome(
        "cv", problem, fit,
        cv_curve=curve,
        cv_se=errors.std(axis=0, ddof=1) / math.sqrt(folds),
        grid=grid.values,
    )


def _grid_fits(problem, grid, path, tol):
    if path is None:
        path = problem.path(grid.values, tol=tol)
    if len(path) != len(grid):
        raise ValueError("precomputed path does not match grid")
    return path


def _rss(problem, beta):
    r = problem.y - problem.X @ beta
    return float(r @ r)


def bic_curve(problem: LassoProblem, path: list[LassoFit], sigma: float) -> np.ndarray:
    n = problem.design.n
    const = n * math.log(sigma**2) + n * math.log(2 * math.pi)
    return np.array([const + _rss(problem, f.beta) / sigma**2 + f.support_size * math.log(n) for f in path])


def aic_curve(problem: LassoProblem, path: list[LassoFit], sigma: float) -> np.ndarray:
    n = problem.design.n
    const = n * math.log(sigma**2) + n * math.log(2 * math.pi)
    return np.array([const + _rss(problem, f.beta) / sigma**2 + 2 * f.support_size for f in path])


def sure_curve(problem: LassoProblem, path: list[LassoFit], sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """SURE along the path, with the active set standing in for the equicorrelation set."""
    ranks = np.empty(len(path), dtype=int)
    cache: dict[bytes, int] = {}
    for i, f in enumerate(path):
        key = f.active_set.tobytes()
        if key not in cache:
            cache[key] = design_rank(problem.X[:, f.active_set])
        ranks[i] = cache[key]
    rss = np.array([_rss(problem, f.beta) for f in path])
    return rss + 2 * sigma**2 * ranks, ranks


def select_bic(X, y=None, grid=None, sigma: float = 1.0, path=None, tol: float = DEFAULT_TOL) -> SelectionOutcome:
    """BIC with known sigma; k is the lasso support size at each grid point."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    problem, grid = _prepare(X, y, grid)
    path = _grid_fits(problem, grid, path, tol)
    curve = bic_curve(problem, path, sigma)
    best = int(np.argmin(curve))
    return _outcome("bic", problem, path[best], sigma, bic_curve=curve, grid=grid.values)


def select_sure(X, y=None, grid=None, sigma: float = 1.0, path=None, tol: float = DEFAULT_TOL) -> SelectionOutcome:
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    problem, grid = _prepare(X, y, grid)
    path = _grid_fits(problem, grid, path, tol)
    curve, ranks = sure_curve(problem, path, sigma)
    best = int(np.argmin(curve))
    return _outcome("sure", problem, path[best], sigma, sure_curve=curve, ranks=ranks, grid=grid.values)


def select_qut(X, y=None, sigma: float = 1.0, m: int = DEFAULT_M, seed=0, estimate=None,
               tol: float = DEFAULT_TOL) -> SelectionOutcome:
    """Lasso at the quantile universal threshold; a single fit.

    ``estimate`` lets callers reuse a NullQuantileEstimate computed at unit
    sigma for the same design (it is rescaled by ``sigma``).
    """
    problem = X if isinstance(X, LassoProblem) else LassoProblem(X, y)
    if estimate is None:
        estimate = qut_monte_carlo(problem.design, sigma=1.0, m=m, seed=seed, keep_samples=False)
    lam = sigma * estimate.quantile
    fit = problem.fit(lam, tol=tol)
    return _outcome("qut", problem, fit, sigma, alpha=estimate.alpha, m=estimate.m, null_quantile=estimate.quantile)


def scaled_lasso_lambda0(P: int, j: int = 2) -> float:
    """sqrt(2^(j-1) ln P), the noise-free part of the scaled lasso penalty."""
    return math.sqrt(2 ** (j - 1) * math.log(P))


def select_scaled_lasso(X, y=None, lambda0: float | None = None, a: float = 0.0, tol: float = 1e-6,
                        max_iter: int = 100, lasso_tol: float = DEFAULT_TOL) -> SelectionOutcome:
    """Joint (beta, sigma) estimation by alternating lasso and variance updates.

    The lasso step uses penalty ``sigma * lambda0 * s`` where ``s`` is the
    root-mean-square column norm, so that lambda0 is expressed per unit
    column norm (for orthonormal X and j=2 this is the universal threshold).
    The variance step is ||y - X beta||^2 / (N - aN).
    """
    if not 0 <= a < 1:
        raise ValueError("a must lie in [0, 1)")
    problem = X if isinstance(X, LassoProblem) else LassoProblem(X, y)
    n, p = problem.design.n, problem.design.p
    if lambda0 is None:
        lambda0 = scaled_lasso_lambda0(max(p, 2))
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    col_scale = math.sqrt(float(np.mean(np.diag(problem.G))))
    dof = n - a * n

    sigma = math.sqrt(problem.yy / n)
    history = [sigma]
    beta = None
    fit = None
    converged = False
    for _ in range(max_iter):
        if sigma < SIGMA_FLOOR:
            raise SigmaCollapse(f"noise estimate collapsed to {sigma:.3g}")
        fit = problem.fit(sigma * lambda0 * col_scale, beta_init=beta, tol=lasso_tol)
        beta = fit.beta
        new_sigma = math.sqrt(_rss(problem, beta) / dof)
        history.append(new_sigma)
        done = abs(new_sigma - sigma) < tol * sigma
        sigma = new_sigma
        if done:
            converged = True
            break
    if sigma < SIGMA_FLOOR:
        raise SigmaCollapse(f"noise estimate collapsed to {sigma:.3g}")
    if not converged:
        warnings.warn(f"scaled lasso did not converge in {max_iter} alternations", ConvergenceWarning, stacklevel=2)
    return _outcome(
        "scaled_lasso", problem, fit, sigma,
        sigma_history=np.array(history), lambda0=lambda0, column_scale=col_scale,
        converged=converged, alternations=len(history) - 1,
    )


RULES = ("cv", "qut", "bic", "sure", "scaled_lasso")
