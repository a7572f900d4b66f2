import math

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from qutlasso import ExperimentReport, PhaseTransitionConfig, SyntheticConfig, run_phase_transition, run_split_eval
from qutlasso.errors import InsufficientData
from qutlasso.experiments import (
    TabularDataset,
    _stream,
    default_k_grid,
    draw_synthetic,
    equicorrelated_design,
    laplace_inversion,
    load_dataset,
    run_synthetic,
    signal_quadratic,
)


# configs and draws

def test_nonzero_count_ceiling():
    assert SyntheticConfig(n=100, theta=0.1).n_nonzero == 2
    assert SyntheticConfig(n=100, theta=0.5).n_nonzero == 10
    assert SyntheticConfig(n=100, theta=0.9).n_nonzero == 64
    assert SyntheticConfig(n=100, theta=0.0).n_nonzero == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(omega=1.0)
    with pytest.raises(ValueError):
        SyntheticConfig(theta=1.5)
    with pytest.raises(ValueError):
        SyntheticConfig(snr=0)
    with pytest.raises(ValueError):
        SyntheticConfig(n=100, p=5, theta=1.0)


def test_identity_covariance_snr_is_squared_norm():
    cfg = SyntheticConfig(n=50, p=80, omega=0.0, snr=2.5)
    _, _, beta, _ = draw_synthetic(cfg, _stream(0, 1))
    assert float(beta @ beta) == pytest.approx(2.5, abs=1e-10)


@pytest.mark.parametrize("omega", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("snr", [0.5, 1.0, 20.0])
def test_snr_calibration(omega, snr):
    cfg = SyntheticConfig(n=50, p=80, omega=omega, theta=0.5, snr=snr)
    for rep in range(5):
        _, _, beta, _ = draw_synthetic(cfg, _stream(3, rep))
        assert abs(signal_quadratic(beta, omega) - snr) < 1e-10
        assert np.count_nonzero(beta) == cfg.n_nonzero


def test_signal_quadratic_matches_matrix():
    rng = np.random.default_rng(0)
    beta = rng.standard_normal(7)
    omega = 0.3
    S = (1 - omega) * np.eye(7) + omega * np.ones((7, 7))
    assert signal_quadratic(beta, omega) == pytest.approx(beta @ S @ beta, rel=1e-12)


def test_laplace_inversion_distribution():
    draws = laplace_inversion(np.random.default_rng(1), 20000)
    assert stats.kstest(draws, stats.laplace.cdf).pvalue > 0.01


def test_equicorrelated_design_correlation():
    X = equicorrelated_design(np.random.default_rng(2), 20000, 4, 0.6)
    C = np.corrcoef(X, rowvar=False)
    off = C[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 0.6, atol=0.03)


def test_default_k_grid():
    ks = default_k_grid(100)
    assert ks[0] == 1 and ks[-1] == 100
    assert len(ks) == 12
    assert default_k_grid(20) == sorted(set(default_k_grid(20)))


# phase transition

def _small_phase(**kw):
    cfg = dict(p=60, n_grid=[20, 40], k_policy={20: [1, 5], 40: [2, 50]}, replications=3, seed=5, m=200)
    cfg.update(kw)
    return PhaseTransitionConfig(**cfg)


def test_phase_reproducible_and_skips_infeasible():
    a = run_phase_transition(_small_phase())
    b = run_phase_transition(_small_phase())
    pd.testing.assert_frame_equal(a.records, b.records)
    assert a.metadata["skipped"] == [(40, 50)]
    assert set(zip(a.summary.n, a.summary.k)) == {(20, 1), (20, 5), (40, 2)}
    assert (a.summary.replications == 3).all()


def test_phase_cell_independence():
    full = run_phase_transition(_small_phase()).records
    alone = run_phase_transition(_small_phase(n_grid=[40], k_policy={40: [2]})).records
    pd.testing.assert_frame_equal(full[full.n == 40].reset_index(drop=True), alone)


def test_phase_threads_match_serial():
    a = run_phase_transition(_small_phase())
    b = run_phase_transition(_small_phase(), n_jobs=2)
    pd.testing.assert_frame_equal(a.records, b.records)


def test_phase_easy_and_hard_corners():
    cfg = PhaseTransitionConfig(n_grid=[180], k_policy={180: [1, 180]}, replications=50, seed=1)
    s = run_phase_transition(cfg).summary
    oracle = s[s.rule == "oracle"].set_index("k")["oracle_inclusive_mean"]
    assert oracle[1] >= 0.95
    assert oracle[180] <= 0.05


def test_phase_qut_beats_cv_oir_at_low_delta():
    cfg = PhaseTransitionConfig(n_grid=[40], replications=20, seed=2)
    s = run_phase_transition(cfg, rules=("qut", "cv", "oracle")).summary
    qut = s[s.rule == "qut"].set_index("k")
    cv = s[s.rule == "cv"].set_index("k")
    both = (qut.oracle_inclusive_mean > 0) & (cv.oracle_inclusive_mean > 0)
    assert both.any()
    # where both rules recover nothing of the oracle the medians tie at zero
    assert (qut.oir_median[both] >= cv.oir_median[both]).all()
    informative = both & ((qut.oir_median > 0) | (cv.oir_median > 0))
    assert informative.any()
    assert (qut.oir_median[informative] > cv.oir_median[informative]).all()


def test_phase_inclusion_monotone_in_rho():
    cfg = PhaseTransitionConfig(n_grid=[100], replications=30, seed=3)
    s = run_phase_transition(cfg).summary
    freq = s[s.rule == "oracle"].sort_values("k")["oracle_inclusive_mean"].to_numpy()
    for a, b in zip(freq[:-1], freq[1:]):
        se = math.sqrt((a * (1 - a) + b * (1 - b)) / 30)
        assert b <= a + 3 * se


# synthetic

def test_synthetic_records():
    cfg = SyntheticConfig(n=40, p=60, omega=0.4, theta=0.5, snr=5.0, replications=2, seed=1, m=200)
    rep = run_synthetic(cfg)
    assert set(rep.records.rule) == {"cv", "qut", "bic", "sure", "scaled_lasso"}
    assert len(rep.records) == 10
    assert np.all(np.abs(rep.records.snr_realized - 5.0) < 1e-10)
    sig = rep.records.set_index("rule").sigma_hat
    assert np.isnan(sig["cv"]).all() and np.isfinite(sig["qut"]).all()


# split harness

def _dataset(n, p, seed=0, k=5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) * rng.uniform(0.5, 3, p) + rng.uniform(-2, 2, p)
    beta = np.zeros(p)
    beta[:k] = np.linspace(2, 1, k)
    y = 4.0 + X @ beta + rng.standard_normal(n)
    return TabularDataset(X, y, [f"x{i}" for i in range(p)], "y")


def test_split_eval_single_repetition():
    rep = run_split_eval(_dataset(60, 30), repetitions=1, seed=0, m=200)
    assert len(rep.records) == 5
    assert (rep.records.replicate == 0).all()


def test_split_eval_small_training_fraction_runs():
    rep = run_split_eval(_dataset(300, 50), train_fraction=0.1, repetitions=2, seed=1, m=200)
    assert set(rep.records.rule) == {"cv", "qut", "bic", "sure", "scaled_lasso"}
    assert np.isfinite(rep.records.predictive_risk).all()


def test_split_eval_insufficient_training_rows():
    with pytest.raises(InsufficientData):
        run_split_eval(_dataset(30, 10), train_fraction=0.5, repetitions=1)


def test_split_eval_riboflavin_shaped_stand_in():
    rep = run_split_eval(_dataset(71, 4088, seed=4), train_fraction=0.5, repetitions=5, rules=("qut", "cv"), seed=2)
    med = rep.summary.set_index("rule").support_size_median
    assert med["qut"] <= med["cv"]


# loader and reports

def test_csv_loader(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,y\n1,2,3\n4,5,6\n")
    data = load_dataset(path, "y")
    assert data.feature_names == ["a", "b"]
    np.testing.assert_array_equal(data.y, [3, 6])
    with pytest.raises(ValueError, match="not in"):
        load_dataset(path, "z")
    path.write_text("a,b,y\n1,2,3\n4,5\n")
    with pytest.raises(ValueError, match="expected 3 fields"):
        load_dataset(path, "y")
    path.write_text("a,b,y\n1,x,3\n")
    with pytest.raises(ValueError):
        load_dataset(path, "y")


def test_report_round_trip(tmp_path):
    rep = run_phase_transition(_small_phase())
    rep.to_json(tmp_path / "r.json")
    back = ExperimentReport.read_json(tmp_path / "r.json")
    pd.testing.assert_frame_equal(back.records, rep.records, check_dtype=False)
    pd.testing.assert_frame_equal(back.summary, rep.summary, check_dtype=False)
    assert back.metadata["skipped"] == [[40, 50]]
    rep.to_csv(tmp_path / "s.csv")
    csv = pd.read_csv(tmp_path / "s.csv", float_precision="round_trip")
    pd.testing.assert_frame_equal(csv, rep.summary, check_dtype=False)
