import math

import numpy as np
import pytest

from oracles import random_orthonormal
from qutlasso import (
    LambdaGrid,
    LassoProblem,
    fit_lasso,
    lambda_grid,
    select_bic,
    select_cv,
    select_qut,
    select_scaled_lasso,
    select_sure,
)
from qutlasso.errors import InvalidFolds, SigmaCollapse
from qutlasso.experiments import SyntheticConfig, _stream, draw_synthetic
from qutlasso.selectors import aic_curve, cv_folds, scaled_lasso_lambda0, sure_curve


def _sparse_data(rng, n=60, p=40, k=3, amp=3.0):
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:k] = amp
    return X, X @ beta + rng.standard_normal(n)


def test_grid_validation():
    with pytest.raises(ValueError):
        LambdaGrid([1.0, 2.0])
    with pytest.raises(ValueError):
        LambdaGrid([1.0, 0.0])
    g = lambda_grid(np.eye(3), [3.0, 1.0, 0.5], n_lambda=10)
    assert g.values[0] == 3.0 and g.values[-1] == pytest.approx(3e-3)
    assert lambda_grid(np.eye(3), [3.0, 1.0, 0.5], n_lambda=10, lambda_min=1e-4).values[-1] == pytest.approx(1e-4)


def test_cv_folds_partition():
    parts = cv_folds(23, 5, seed=1)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert {len(p) for p in parts} <= {4, 5}
    with pytest.raises(InvalidFolds):
        cv_folds(3, 5, 0)
    with pytest.raises(InvalidFolds):
        cv_folds(10, 1, 0)


def test_cv_null_selects_tiny_models():
    sizes = []
    for rep in range(20):
        rng = np.random.default_rng(1000 + rep)
        sizes.append(select_cv(rng.standard_normal((50, 100)), rng.standard_normal(50), seed=rep).support_size)
    # typical replicates are empty; CV occasionally overfits pure noise badly
    assert np.median(sizes) <= 2, sizes
    assert np.mean(np.array(sizes) == 0) >= 0.5, sizes


def test_cv_finds_dominant_covariate():
    hits = 0
    for rep in range(100):
        rng = np.random.default_rng(2000 + rep)
        X = rng.standard_normal((100, 50))
        y = 10 * X[:, 0] + rng.standard_normal(100)
        hits += 0 in select_cv(X, y, seed=rep).support
    assert hits >= 95


def test_cv_leave_one_out(rng):
    X, y = _sparse_data(rng, n=10, p=6, k=1)
    out = select_cv(X, y, folds=10)
    assert out.lam in out.diagnostics["grid"]


def test_bic_null_selects_empty():
    empty = 0
    for rep in range(100):
        rng = np.random.default_rng(3000 + rep)
        empty += select_bic(rng.standard_normal((100, 200)), rng.standard_normal(100), sigma=1.0).support_size == 0
    assert empty >= 90


def test_bic_not_larger_than_sure_or_aic_orthonormal():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = random_orthonormal(rng, 64)
        beta = np.zeros(64)
        beta[:6] = 4.0
        y = X @ beta + rng.standard_normal(64)
        problem = LassoProblem(X, y)
        grid = lambda_grid(problem)
        path = problem.path(grid.values)
        bic = select_bic(problem, grid=grid, path=path)
        sure = select_sure(problem, grid=grid, path=path)
        aic = path[int(np.argmin(aic_curve(problem, path, 1.0)))]
        assert bic.support_size <= sure.support_size
        assert bic.support_size <= aic.support_size


def test_bic_at_least_qut_on_average():
    cfg = SyntheticConfig(n=100, p=300, theta=0.5, snr=1.0, replications=20)
    bic, qut = [], []
    for rep in range(cfg.replications):
        X, y, _, _ = draw_synthetic(cfg, _stream(7, rep))
        problem = LassoProblem(X, y)
        bic.append(select_bic(problem).support_size)
        qut.append(select_qut(problem, m=500, seed=rep).support_size)
    assert np.mean(bic) >= np.mean(qut)


def test_sure_at_lambda_max_is_rss(rng):
    X, y = _sparse_data(rng)
    problem = LassoProblem(X, y)
    fit = problem.fit(problem.lambda_max)
    curve, ranks = sure_curve(problem, [fit], 1.3)
    assert ranks[0] == 0
    assert curve[0] == pytest.approx(float(y @ y), rel=1e-12)


def test_sure_equals_aic_up_to_constant_full_rank(rng):
    X, y = _sparse_data(rng, n=80, p=20)
    problem = LassoProblem(X, y)
    grid = lambda_grid(problem)
    path = problem.path(grid.values)
    sigma = 1.0
    sure, _ = sure_curve(problem, path, sigma)
    aic = aic_curve(problem, path, sigma)
    diff = sure / sigma**2 - aic
    np.testing.assert_allclose(diff, diff[0], rtol=0, atol=1e-8 * np.abs(aic).max())
    assert np.argmin(sure) == np.argmin(aic)


def test_sure_orthonormal_brute_force():
    rng = np.random.default_rng(17)
    X = random_orthonormal(rng, 64)
    beta = np.zeros(64)
    beta[:8] = np.linspace(1, 5, 8)
    y = X @ beta + rng.standard_normal(64)
    z = X.T @ y
    grid = lambda_grid(X, y)
    # exact soft-threshold fits: RSS = ||y||^2 - ||z||^2 + ||z - soft(z)||^2, rank = #|z| > lam
    brute = []
    for lam in grid.values:
        b = np.sign(z) * np.maximum(np.abs(z) - lam, 0)
        rss = float(y @ y - z @ z + (z - b) @ (z - b))
        brute.append(rss + 2 * np.count_nonzero(b))
    out = select_sure(X, y, grid=grid, sigma=1.0)
    assert out.lam == grid.values[int(np.argmin(brute))]


def test_qut_selector_uses_threshold(rng):
    X, y = _sparse_data(rng)
    out = select_qut(X, y, sigma=1.0, m=500, seed=3)
    from qutlasso import qut_monte_carlo

    assert out.lam == qut_monte_carlo(X, m=500, seed=3).lambda_qut
    np.testing.assert_array_equal(out.support, fit_lasso(X, y, out.lam).active_set)


def test_grid_membership_support_consistency_determinism(rng):
    X, y = _sparse_data(rng)
    grid = lambda_grid(X, y)
    for select in (select_cv, select_bic, select_sure):
        a = select(X, y, grid=grid)
        b = select(X, y, grid=grid)
        assert a.lam in grid.values
        assert a.lam == b.lam
        np.testing.assert_array_equal(a.support, fit_lasso(X, y, a.lam).active_set)
        np.testing.assert_array_equal(a.beta_refit, b.beta_refit)


def test_scaled_lasso_zero_response_collapses(rng):
    with pytest.raises(SigmaCollapse):
        select_scaled_lasso(rng.standard_normal((20, 10)), np.zeros(20))


def test_scaled_lasso_fixed_point(rng):
    X, y = _sparse_data(rng, n=80, p=100)
    out = select_scaled_lasso(X, y, tol=1e-8)
    assert out.diagnostics["converged"]
    problem = LassoProblem(X, y)
    lam = out.sigma_used * out.diagnostics["lambda0"] * out.diagnostics["column_scale"]
    fit = problem.fit(lam)
    r = y - X @ fit.beta
    assert abs(math.sqrt(r @ r / len(y)) - out.sigma_used) < 1e-6 * out.sigma_used


def test_scaled_lasso_lambda0():
    assert scaled_lasso_lambda0(1000) == pytest.approx(math.sqrt(2 * math.log(1000)))
    assert scaled_lasso_lambda0(1000, j=1) == pytest.approx(math.sqrt(math.log(1000)))


def test_scaled_lasso_sigma_median():
    cfg = SyntheticConfig(n=100, p=1000, theta=0.5, snr=1.0, replications=100)
    sig = [select_scaled_lasso(*draw_synthetic(cfg, _stream(11, rep))[:2]).sigma_used for rep in range(100)]
    assert 0.7 <= np.median(sig) <= 1.3
