import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qutlasso import rcv_variance, refit_least_squares, residual_variance
from qutlasso.errors import DegreesOfFreedomExhausted, InsufficientData
from qutlasso.variance import rcv_split


def test_null_model_mle(rng):
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    est = residual_variance(X, y, np.zeros(5), 0)
    assert est.sigma2 == pytest.approx(float(y @ y) / 30, rel=1e-14)
    assert est.k_used == 0


def test_exact_fit_gives_zero(rng):
    X = rng.standard_normal((10, 3))
    beta = rng.standard_normal(3)
    for k in (0, 3, 9):
        assert residual_variance(X, X @ beta, beta, k).sigma2 == pytest.approx(0.0, abs=1e-25)


def test_dof_exhausted(rng):
    with pytest.raises(DegreesOfFreedomExhausted):
        residual_variance(np.eye(4), np.ones(4), np.zeros(4), 4)


def test_unbiased_with_rank_dof():
    # N=50, rank 5, least-squares fit, k = rank: E[sigma2_hat] = sigma^2
    rng = np.random.default_rng(123)
    X = rng.standard_normal((50, 5))
    sigma2 = 2.0
    mu = X @ np.array([1.0, -1.0, 0.5, 0.0, 2.0])
    ests = np.empty(10_000)
    for i in range(len(ests)):
        y = mu + np.sqrt(sigma2) * rng.standard_normal(50)
        ests[i] = residual_variance(X, y, refit_least_squares(X, y, range(5)), 5).sigma2
    se = ests.std(ddof=1) / np.sqrt(len(ests))
    assert abs(ests.mean() - sigma2) <= 3 * se


@settings(max_examples=30, derandomize=True)
@given(seed=st.integers(0, 2**31), c=st.floats(-50, 50).filter(lambda v: abs(v) > 1e-3))
def test_scale_equivariance_and_nonnegativity(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((15, 4))
    y = rng.standard_normal(15)
    beta = rng.standard_normal(4)
    a = residual_variance(X, y, beta, 2).sigma2
    b = residual_variance(X, c * y, c * beta, 2).sigma2
    assert a >= 0
    assert b == pytest.approx(c**2 * a, rel=1e-10)


def test_rcv_split_equal_halves():
    a, b = rcv_split(41, 3)
    assert {len(a), len(b)} == {20, 21}
    assert sorted(np.concatenate([a, b]).tolist()) == list(range(41))
    np.testing.assert_array_equal(rcv_split(41, 3)[0], a)


def test_rcv_symmetric_in_halves(rng):
    X = rng.standard_normal((60, 30))
    y = X[:, :2] @ np.array([2.0, -1.0]) + rng.standard_normal(60)
    a, b = rcv_split(60, 5)
    one = rcv_variance(X, y, seed=5, split=(a, b))
    two = rcv_variance(X, y, seed=5, split=(b, a))
    assert one.sigma2 == two.sigma2
    assert one.sigma2 == np.mean(one.details["half_estimates"])


def test_rcv_insufficient_rows(rng):
    with pytest.raises(InsufficientData):
        rcv_variance(rng.standard_normal((19, 5)), rng.standard_normal(19))


def test_rcv_fallback_flag(monkeypatch):
    # force the inner selector to return a model as large as a half
    import qutlasso.variance as variance

    monkeypatch.setattr(variance, "_select", lambda X, y, *args: np.arange(len(y)))
    rng = np.random.default_rng(0)
    X = rng.standard_normal((20, 200))
    y = rng.standard_normal(20)
    with pytest.warns(UserWarning, match="k=0"):
        est = rcv_variance(X, y, seed=0)
    assert est.k_used == (0, 0)
    assert any(est.details["fallback"])
    assert est.sigma2 >= 0


def test_rcv_scaled_lasso_inner(rng):
    X = rng.standard_normal((60, 40))
    y = 3 * X[:, 0] + rng.standard_normal(60)
    est = rcv_variance(X, y, seed=1, inner_selector="scaled_lasso")
    assert est.details["inner_selector"] == "scaled_lasso"
    assert 0.3 < est.sigma2 < 3


def test_rcv_null_median():
    ests = []
    for rep in range(100):
        rng = np.random.default_rng(4000 + rep)
        ests.append(rcv_variance(rng.standard_normal((100, 200)), rng.standard_normal(100), seed=rep).sigma2)
    assert 0.8 <= np.median(ests) <= 1.2
