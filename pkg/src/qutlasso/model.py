"""Design matrices, the lasso coordinate-descent solver and least-squares refits.

The lasso is solved in the unnormalized form

    minimize  0.5 * ||y - X beta||_2^2 + lam * ||beta||_1

by cyclic coordinate descent with covariance updates: the Gram matrix
``X^T X`` and ``X^T y`` are formed once, and the gradient ``X^T (y - X beta)``
is updated in place whenever a coefficient moves. Coordinates are visited in
natural order, so results are deterministic for fixed inputs.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConvergenceWarning, DimensionMismatch, NonFiniteInput

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000
RANK_RTOL = 1e-10
POLISH_BURST = 16


@dataclass
class DesignMatrix:
    """An N x P covariate matrix plus the scaling applied to its columns.

    ``values == raw[:, j] * column_scale[j]`` (after optional centering).
    Columns flagged in ``constant`` were left unscaled and the solver keeps
    their coefficients at zero.
    """

    values: np.ndarray
    column_scale: np.ndarray
    standardized: bool = False
    constant: np.ndarray | None = None
    column_mean: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != 2 or min(self.values.shape) < 1:
            raise DimensionMismatch(f"design must be a non-empty 2-d array, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NonFiniteInput("design contains non-finite entries")
        if self.constant is None:
            self.constant = np.zeros(self.p, dtype=bool)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, X) -> "DesignMatrix":
        X = np.asarray(X, dtype=float)
        return cls(X, np.ones(X.shape[1]))

    def to_original_scale(self, beta: np.ndarray) -> np.ndarray:
        """Map coefficients fitted on ``values`` back to the raw columns."""
        return np.asarray(beta) * self.column_scale


@dataclass
class TrueModel:
    beta0: np.ndarray
    support: np.ndarray = field(init=False)
    sparsity: int = field(init=False)

    def __post_init__(self):
        self.beta0 = np.asarray(self.beta0, dtype=float)
        self.support = np.flatnonzero(self.beta0)
        self.sparsity = len(self.support)


@dataclass
class LassoFit:
    lam: float
    beta: np.ndarray
    active_set: np.ndarray
    objective: float
    kkt_violation: float
    iterations: int
    converged: bool = True
    objective_trace: np.ndarray | None = None

    @property
    def support_size(self) -> int:
        return len(self.active_set)


def soft_threshold(z, t):
    """sign(z) * max(|z| - t, 0); works elementwise on arrays."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def standardize(X, center: bool = False) -> DesignMatrix:
    """Scale each non-constant column to unit empirical variance.

    Columns are not mean-centered unless ``center=True``. Constant columns
    are left as they are and flagged.
    """
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("design must be 2-d")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("design contains non-finite entries")
    constant = np.ptp(X, axis=0) == 0
    var = X.var(axis=0)
    scale = np.ones(X.shape[1])
    scale[~constant] = 1.0 / np.sqrt(var[~constant])
    mean = None
    if center:
        mean = X.mean(axis=0)
        mean[constant] = 0.0
        X = X - mean
    return DesignMatrix(X * scale, scale, standardized=True, constant=constant, column_mean=mean)


def _as_design(X) -> DesignMatrix:
    return X if isinstance(X, DesignMatrix) else DesignMatrix.from_array(X)


def _as_response(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != n:
        raise DimensionMismatch(f"response has length {y.shape[0]}, design has {n} rows")
    if not np.all(np.isfinite(y)):
        raise NonFiniteInput("response contains non-finite entries")
    return y


def lambda_max(X, y) -> float:
    """Smallest penalty at which the lasso solution is identically zero, ||X^T y||_inf."""
    design = _as_design(X)
    y = _as_response(y, design.n)
    corr = np.abs(design.values.T @ y)
    corr[design.constant] = 0.0
    return float(corr.max())


# ---------------------------------------------------------------------------
# compiled kernels


@njit(cache=True, nogil=True)
def _sweep(G, beta, grad, lam, free):
    p = beta.shape[0]
    dmax = 0.0
    for j in range(p):
        if not free[j]:
            continue
        bj = beta[j]
        gjj = G[j, j]
        z = grad[j] + gjj * bj
        if z > lam:
            nb = (z - lam) / gjj
        elif z < -lam:
            nb = (z + lam) / gjj
        else:
            nb = 0.0
        d = nb - bj
        if d != 0.0:
            beta[j] = nb
            for i in range(p):
                grad[i] -= G[j, i] * d
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True, nogil=True)
def _sweep_working_set(G, beta, grad, lam, idx):
    dmax = 0.0
    for a in range(idx.shape[0]):
        j = idx[a]
        bj = beta[j]
        gjj = G[j, j]
        z = grad[j] + gjj * bj
        if z > lam:
            nb = (z - lam) / gjj
        elif z < -lam:
            nb = (z + lam) / gjj
        else:
            nb = 0.0
        d = nb - bj
        if d != 0.0:
            beta[j] = nb
            for b in range(idx.shape[0]):
                i = idx[b]
                grad[i] -= G[j, i] * d
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


@njit(cache=True, nogil=True)
def _exact_grad(G, c, beta, grad):
    p = beta.shape[0]
    for i in range(p):
        grad[i] = c[i]
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(p):
                grad[i] -= G[j, i] * bj


@njit(cache=True, nogil=True)
def _kkt_violation(grad, beta, lam, free):
    v = 0.0
    for j in range(beta.shape[0]):
        if not free[j]:
            continue
        if beta[j] == 0.0:
            e = abs(grad[j]) - lam
        elif beta[j] > 0.0:
            e = abs(grad[j] - lam)
        else:
            e = abs(grad[j] + lam)
        if e > v:
            v = e
    return v


@njit(cache=True, nogil=True)
def _objective_from_grad(beta, c, grad, lam, yy):
    # 0.5||y - Xb||^2 = 0.5 y'y - b'c + 0.5 b'Gb, and b'Gb = b'c - b'grad
    bc = 0.0
    bg = 0.0
    l1 = 0.0
    for j in range(beta.shape[0]):
        bc += beta[j] * c[j]
        bg += beta[j] * grad[j]
        l1 += abs(beta[j])
    return 0.5 * yy - 0.5 * bc - 0.5 * bg + lam * l1


@njit(cache=True, nogil=True)
def _cd_solve(G, c, lam, beta, free, tol, max_sweeps, trace, yy):
    """Run coordinate descent in place on ``beta``.

    Returns (sweeps, kkt_violation, converged, n_trace).
    """
    p = beta.shape[0]
    grad = np.empty(p)
    _exact_grad(G, c, beta, grad)
    sweeps = 0
    ntrace = 0
    kkt = np.inf
    converged = False
    while sweeps < max_sweeps:
        d = _sweep(G, beta, grad, lam, free)
        sweeps += 1
        if ntrace < trace.shape[0]:
            trace[ntrace] = _objective_from_grad(beta, c, grad, lam, yy)
            ntrace += 1
        bmax = 0.0
        for j in range(p):
            if abs(beta[j]) > bmax:
                bmax = abs(beta[j])
        if d < tol * (1.0 + bmax):
            _exact_grad(G, c, beta, grad)
            kkt = _kkt_violation(grad, beta, lam, free)
            if kkt <= tol:
                converged = True
                break
            continue
        # iterate on the current active set until it settles, then re-sweep all;
        # only the active gradient entries are kept current in between
        idx = np.flatnonzero(beta)
        while sweeps < max_sweeps:
            d = _sweep_working_set(G, beta, grad, lam, idx)
            sweeps += 1
            if ntrace < trace.shape[0]:
                trace[ntrace] = _objective_from_grad(beta, c, grad, lam, yy)
                ntrace += 1
            bmax = 0.0
            for j in range(p):
                if abs(beta[j]) > bmax:
                    bmax = abs(beta[j])
            if d < tol * (1.0 + bmax):
                break
        _exact_grad(G, c, beta, grad)
    if not converged:
        _exact_grad(G, c, beta, grad)
        kkt = _kkt_violation(grad, beta, lam, free)
    return sweeps, kkt, converged, ntrace


# ---------------------------------------------------------------------------


class LassoProblem:
    """A fixed (X, y) pair with its Gram matrix cached for repeated solves.

    Warm starts make sequences of fits (paths, scaled-lasso alternations)
    much cheaper than independent calls to :func:`fit_lasso`.
    """

    def __init__(self, X, y, gram=None):
        self.design = _as_design(X)
        self.X = self.design.values
        self.y = _as_response(y, self.design.n)
        if gram is None:
            gram = self.X.T @ self.X
        self.G = np.ascontiguousarray(gram)
        self.c = self.X.T @ self.y
        self.yy = float(self.y @ self.y)
        self.free = (~self.design.constant) & (np.diag(self.G) > 0)

    @property
    def lambda_max(self) -> float:
        return float(np.max(np.abs(self.c[self.free]), initial=0.0))

    def fit(self, lam: float, beta_init=None, tol: float = DEFAULT_TOL,
            max_iter: int = DEFAULT_MAX_ITER, trace: bool = False) -> LassoFit:
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        if tol <= 0:
            raise ValueError("tol must be positive")
        p = self.design.p
        if beta_init is None:
            beta = np.zeros(p)
        else:
            beta = np.array(beta_init, dtype=float)
            if beta.shape != (p,):
                raise DimensionMismatch(f"beta_init must have length {p}")
            beta[~self.free] = 0.0
        buf = np.empty(min(max_iter, 100_000) if trace else 0)
        # Coordinate descent in growing bursts. Between bursts, try solving the
        # stationarity equations on the current sign pattern; near interpolation
        # this finishes in a few bursts what CD would need thousands of sweeps for.
        sweeps = ntrace = 0
        kkt, converged = np.inf, False
        if beta_init is not None and np.any(beta) and not trace:
            kkt = self._polish(beta, lam, np.inf)
            converged = kkt <= tol
        burst = POLISH_BURST
        while not converged and sweeps < max_iter:
            s, kkt, converged, nt = _cd_solve(
                self.G, self.c, float(lam), beta, self.free, float(tol), int(min(burst, max_iter - sweeps)),
                buf[ntrace:], self.yy,
            )
            sweeps += s
            ntrace += nt
            if np.any(beta):
                kkt = self._polish(beta, lam, kkt)
                converged = converged or kkt <= tol
            burst *= 2
        if not converged:
            warnings.warn(
                f"lasso did not converge in {max_iter} sweeps at lambda={lam:.6g} "
                f"(KKT violation {kkt:.3g})",
                ConvergenceWarning,
                stacklevel=2,
            )
        r = self.y - self.X @ beta
        objective = 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())
        return LassoFit(
            lam=float(lam),
            beta=beta,
            active_set=np.flatnonzero(beta),
            objective=objective,
            kkt_violation=float(kkt),
            iterations=int(sweeps),
            converged=bool(converged),
            objective_trace=buf[:ntrace].copy() if trace else None,
        )

    def _polish(self, beta, lam, kkt):
        """Exact active-set step on the current sign pattern.

        If the active columns are linearly dependent, first move along null
        directions of X_A (which leave the fit unchanged) until coefficients
        hit zero. Then solve the stationarity equations for the fixed signs;
        if the solution flips a sign, stop where the first coefficient crosses
        zero, drop it and solve again. Every step lowers the objective, so
        the result replaces ``beta`` (in place) when its objective is lower.
        Returns the KKT violation of the returned ``beta``.
        """
        lam = float(lam)
        active = np.flatnonzero(beta)
        n = self.design.n
        # solutions have at most about n nonzeros; larger sets are far from one
        if len(active) == 0 or len(active) > n + max(2, n // 10):
            return kkt
        b = beta[active].copy()
        G_AA = self.G[np.ix_(active, active)]
        signs = np.sign(b)
        for _ in range(2 * len(active) + 1):
            if len(active) == 0:
                break
            w, V = np.linalg.eigh(G_AA)
            if w[0] <= RANK_RTOL * max(w[-1], 1.0):
                d = V[:, 0]
                t_max = np.inf
            else:
                target = np.linalg.solve(G_AA, self.c[active] - lam * signs)
                d = b - target
                t_max = 1.0
            # step b - t d, stopping at the first zero crossing
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(np.abs(d) > 1e-14 * np.abs(b).max(), b / d, np.nan)
            if t_max == np.inf and not np.any(ratio > 0):
                d, ratio = -d, -ratio
            pos = np.where(ratio > 0, ratio, np.inf)
            hit = int(np.argmin(pos))
            if pos[hit] >= t_max:
                b = target
                break
            b = b - pos[hit] * d
            keep = np.arange(len(active)) != hit
            active, b, signs = active[keep], b[keep], signs[keep]
            G_AA = G_AA[np.ix_(keep, keep)]
        else:
            return kkt
        cand = np.zeros_like(beta)
        cand[active] = b
        grad_new = self.c - self.G[:, active] @ b
        old_active = np.flatnonzero(beta)
        grad_old = self.c - self.G[:, old_active] @ beta[old_active]
        f_new = _objective_from_grad(cand, self.c, grad_new, lam, self.yy)
        f_old = _objective_from_grad(beta, self.c, grad_old, lam, self.yy)
        new_kkt = float(_kkt_violation(grad_new, cand, lam, self.free))
        if f_new < f_old or (f_new == f_old and new_kkt < kkt):
            beta[:] = cand
            return new_kkt
        return kkt

    def path(self, lambdas, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list[LassoFit]:
        """Warm-started fits along ``lambdas`` in the order given (use descending)."""
        fits = []
        beta = None
        for lam in lambdas:
            fit = self.fit(lam, beta_init=beta, tol=tol, max_iter=max_iter)
            beta = fit.beta
            fits.append(fit)
        return fits


def fit_lasso(X, y, lam: float, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              beta_init=None) -> LassoFit:
    """Solve the lasso at a single penalty.

    Parameters
    ----------
    X : DesignMatrix or array of shape (N, P)
    y : array of shape (N,)
    lam : float
        Penalty on ``||beta||_1``; the squared loss carries a factor 1/2.
    tol : float
        Sweeps stop once the largest coefficient change falls below
        ``tol * (1 + ||beta||_inf)`` and every KKT condition holds to ``tol``.
    max_iter : int
        Cap on coordinate sweeps. Hitting it returns the last iterate with
        ``converged=False`` and emits a ``ConvergenceWarning``.
    """
    return LassoProblem(X, y).fit(lam, beta_init=beta_init, tol=tol, max_iter=max_iter)


def lasso_path(X, y, lambdas, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> list[LassoFit]:
    return LassoProblem(X, y).path(lambdas, tol=tol, max_iter=max_iter)


def refit_least_squares(X, y, support) -> np.ndarray:
    """Least squares on the columns in ``support``; zeros elsewhere.

    Rank-deficient supports get the minimum-norm solution.
    """
    design = _as_design(X)
    y = _as_response(y, design.n)
    support = np.asarray(support, dtype=int).ravel()
    beta = np.zeros(design.p)
    if support.size == 0:
        return beta
    if support.min() < 0 or support.max() >= design.p:
        raise IndexError("support index out of range")
    coef, *_ = np.linalg.lstsq(design.values[:, support], y, rcond=RANK_RTOL)
    beta[support] = coef
    return beta


def design_rank(A: np.ndarray) -> int:
    """Numerical rank with relative tolerance 1e-10 on the singular values."""
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > RANK_RTOL * s[0]))
