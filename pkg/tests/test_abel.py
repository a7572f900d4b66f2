import numpy as np
import pandas as pd
import pytest

from qutlasso import alpha_p, build_abel, haar_synthesis, run_abel_experiment
from qutlasso.abel import (
    MSE_CONVENTIONS,
    abel_grid,
    abel_setup,
    blocks_profile,
    calibrate_mse_convention,
    summary_table,
    write_summary_csv,
)
from qutlasso.errors import InvalidSize


@pytest.fixture(scope="module")
def setup64():
    return abel_setup(64)


def test_zero_and_linearity(rng):
    A = build_abel(64)
    assert not np.any(A @ np.zeros(64))
    f, g = rng.standard_normal((2, 64))
    np.testing.assert_array_equal(A @ (2 * f), 2 * (A @ f))
    np.testing.assert_allclose(A @ (f + g), A @ f + A @ g, atol=1e-12)


@pytest.mark.parametrize("radius", [30.0, 50.0, 80.0])
def test_disk_transform(radius):
    n, r_max = 512, 100.0
    A = build_abel(n, r_max)
    x = abel_grid(n, r_max)
    # indicator of [0, R] on the cells, R on a cell edge
    f = (x < radius).astype(float)
    exact = np.where(x < radius, 2 * np.sqrt(np.maximum(radius**2 - x**2, 0)), 0.0)
    err = np.linalg.norm(A @ f - exact) / np.linalg.norm(exact)
    assert err < 0.02


def test_haar_orthonormal_and_reconstruction(rng):
    for n in (8, 64, 512):
        W = haar_synthesis(n).W
        np.testing.assert_allclose(W.T @ W, np.eye(n), atol=1e-10)
        v = rng.standard_normal(n)
        basis = haar_synthesis(n)
        np.testing.assert_allclose(basis.synthesis(basis.analysis(v)), v, atol=1e-10)


def test_haar_constant_vector():
    coef = haar_synthesis(64).analysis(np.full(64, 3.0))
    assert np.count_nonzero(np.abs(coef) > 1e-12) == 1
    assert abs(coef[0]) > 0


def test_blocks_has_54_haar_coefficients():
    coef = haar_synthesis(512).analysis(blocks_profile(512))
    assert np.count_nonzero(np.abs(coef) > 1e-10) == 54


def test_sizes_must_be_powers_of_two():
    for bad in (0, 3, 100):
        with pytest.raises(InvalidSize):
            haar_synthesis(bad)
        with pytest.raises(InvalidSize):
            build_abel(bad)


def test_setup_snr_convention(setup64):
    f = setup64.basis.synthesis(setup64.beta_unit * setup64.design.column_scale)
    assert np.std(f) == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(setup64.design.values.var(axis=0), 1.0, atol=1e-8)


def test_near_zero_snr_gives_empty_qut_models(setup64):
    rep = run_abel_experiment(snr_list=(1e-6,), rules=("qut",), replications=100, seed=4, n=64, setup=setup64)
    empty = np.mean(rep.records["support_size"] == 0)
    a = alpha_p(64)
    # expected frequency is 1 - alpha; allow three binomial standard errors
    assert empty >= 1 - a - 3 * np.sqrt(a * (1 - a) / 100)


def test_experiment_records_and_reproducibility(setup64):
    kw = dict(snr_list=(0.5, 1.0), replications=3, seed=2, n=64, setup=setup64)
    a = run_abel_experiment(**kw)
    b = run_abel_experiment(**kw)
    pd.testing.assert_frame_equal(a.records, b.records)
    assert len(a.records) == 2 * 3 * 3
    assert {f"mse_{c}" for c in MSE_CONVENTIONS} <= set(a.records.columns)


def test_summary_layout_and_calibration(tmp_path, setup64):
    rep = run_abel_experiment(snr_list=(0.25, 1.0), replications=2, seed=0, n=64, setup=setup64)
    frame = summary_table(rep, "f_mean")
    assert list(frame.index) == ["qut", "bic", "sure"]
    flat = write_summary_csv(rep, tmp_path / "t1.csv", "f_sum")
    back = pd.read_csv(tmp_path / "t1.csv", index_col="method", float_precision="round_trip")
    assert list(back.columns) == ["snr=0.25:FDR", "snr=0.25:TPR", "snr=0.25:MSE", "snr=1:FDR", "snr=1:TPR", "snr=1:MSE"]
    np.testing.assert_array_equal(back.to_numpy(), flat.to_numpy())
    qut = rep.records[(rep.records.rule == "qut") & (rep.records.snr == 0.25)]
    chosen = calibrate_mse_convention(rep, target=qut["mse_coef_sum"].mean())
    assert chosen == "coef_sum"


def test_unknown_rule_rejected(setup64):
    with pytest.raises(ValueError):
        run_abel_experiment(rules=("cv",), replications=1, n=64, setup=setup64)
