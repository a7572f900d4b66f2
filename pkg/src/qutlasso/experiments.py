"""Simulation protocols and the train/test split harness.

* ``run_phase_transition``: Gaussian designs with k strong coefficients,
  sigma known; oracle inclusion and OIR over the (delta = N/P, rho = k/N) plane.
* ``run_synthetic``: equicorrelated Gaussian designs with Laplace
  coefficients calibrated to a target snr; sigma estimated by RCV.
* ``run_split_eval``: repeated random train/test splits of a tabular data
  set; support sizes and test predictive risk.

Every replicate draws from its own substream
``SeedSequence(seed, spawn_key=(*cell, replicate))``, so a cell's results do
not depend on which other cells run or on the number of workers.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientData
from .metrics import oracle_inclusive, oir, predictive_risk, smallest_oracle_support, tpr_fdr
from .model import LassoProblem, standardize
from .report import ExperimentReport
from .selectors import (
    bic_curve,
    lambda_grid,
    select_cv,
    select_scaled_lasso,
    sure_curve,
)
from .thresholds import DEFAULT_M, qut_monte_carlo
from .variance import rcv_variance

SIGMA_RULES = {"qut", "bic", "sure"}
ORACLE_GRID_SIZE = 200
MAX_REDRAWS = 10


def _stream(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _subseed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63 - 1))


def _map(func, items, n_jobs):
    if n_jobs is None or n_jobs <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(func, items))


def _select_all(problem: LassoProblem, rules, sigma, seed, m, grid_path=None):
    """Run each rule on one data set. Returns {rule: (lam, active_set, beta_lasso)}.

    ``grid_path`` is an optional (grid, path) pair reused by BIC and SURE.
    """
    out = {}
    path = grid = None
    if {"bic", "sure"} & set(rules):
        if grid_path is None:
            grid = lambda_grid(problem)
            path = problem.path(grid.values)
        else:
            grid, path = grid_path
    for rule in rules:
        if rule == "qut":
            est = qut_monte_carlo(problem.design, sigma=sigma, m=m, seed=seed, keep_samples=False)
            fit = problem.fit(est.lambda_qut)
        elif rule == "bic":
            fit = path[int(np.argmin(bic_curve(problem, path, sigma)))]
        elif rule == "sure":
            fit = path[int(np.argmin(sure_curve(problem, path, sigma)[0]))]
        elif rule == "cv":
            sel = select_cv(problem, None, seed=seed)
            out[rule] = (sel.lam, sel.support, sel.beta_lasso)
            continue
        elif rule == "scaled_lasso":
            sel = select_scaled_lasso(problem)
            out[rule] = (sel.lam, sel.support, sel.beta_lasso)
            continue
        else:
            raise ValueError(f"unknown rule {rule!r}")
        out[rule] = (fit.lam, fit.active_set, fit.beta)
    return out


# ---------------------------------------------------------------------------
# phase transition


def default_k_grid(n: int, points: int = 12) -> list[int]:
    """k = 1 plus round(rho * n) for rho evenly spaced on [0.05, 1]."""
    ks = {1} | {max(1, int(round(r * n))) for r in np.linspace(0.05, 1.0, points - 1)}
    return sorted(k for k in ks if k <= n)


@dataclass
class PhaseTransitionConfig:
    p: int = 200
    n_grid: list = field(default_factory=lambda: list(range(20, 181, 20)))
    k_policy: dict | None = None
    signal_amplitude: float = 10.0
    replications: int = 50
    seed: int = 0
    sigma: float = 1.0
    m: int = DEFAULT_M
    oracle_grid_size: int = ORACLE_GRID_SIZE
    oracle_grid_eps: float = 1e-3

    @classmethod
    def full_scale(cls, **overrides) -> "PhaseTransitionConfig":
        """P = 1600, nine N from 160 to 1440, every k in 1..N, 100 replicates."""
        n_grid = list(range(160, 1441, 160))
        cfg = dict(p=1600, n_grid=n_grid, k_policy={n: list(range(1, n + 1)) for n in n_grid}, replications=100)
        cfg.update(overrides)
        return cls(**cfg)

    def k_values(self, n: int) -> list[int]:
        if self.k_policy and n in self.k_policy:
            return sorted(int(k) for k in self.k_policy[n])
        return default_k_grid(n)


def _phase_replicate(cfg: PhaseTransitionConfig, n: int, k: int, rep: int, rules) -> list[dict]:
    rng = _stream(cfg.seed, n, k, rep)
    p, sigma = cfg.p, cfg.sigma
    X = rng.standard_normal((n, p))
    beta0 = np.zeros(p)
    beta0[:k] = cfg.signal_amplitude * sigma
    y = X @ beta0 + sigma * rng.standard_normal(n)
    truth = np.arange(k)
    problem = LassoProblem(X, y)

    grid = lambda_grid(problem, n_lambda=cfg.oracle_grid_size, eps=cfg.oracle_grid_eps)
    path = problem.path(grid.values)
    s_star, lam_star = smallest_oracle_support(problem, None, truth, grid, path=path)

    chosen = _select_all(problem, [r for r in rules if r != "oracle"], sigma, _subseed(rng), cfg.m,
                         grid_path=(grid, path))

    recs = []
    base = {"n": n, "k": k, "p": p, "delta": n / p, "rho": k / n, "replicate": rep, "s_star": float(s_star)}
    if "oracle" in rules:
        # the scan itself: inclusive iff some grid fit contains the true support
        inc = not math.isinf(s_star)
        recs.append({**base, "rule": "oracle", "lambda": lam_star if inc else math.nan,
                     "oracle_inclusive": inc, "oir": 1.0 if inc else 0.0,
                     "support_size": float(s_star) if inc else math.nan, "tpr": math.nan, "fdr": math.nan})
    for rule, (lam, active, _) in chosen.items():
        inc = oracle_inclusive(active, truth)
        tpr, fdr = tpr_fdr(active, truth)
        recs.append({**base, "rule": rule, "lambda": lam, "oracle_inclusive": inc,
                     "oir": oir(s_star, active, inc), "support_size": float(len(active)), "tpr": tpr, "fdr": fdr})
    return recs


def run_phase_transition(cfg: PhaseTransitionConfig, rules=("qut", "oracle"), n_jobs: int | None = None) -> ExperimentReport:
    """Oracle inclusion and OIR on a grid of (N, k) cells with sigma known.

    Nonzero coefficients sit at the first k positions. The oracle scan fits
    the lasso on a geometric grid of ``oracle_grid_size`` penalties and
    reports whether any fit contains the true support (rule ``"oracle"``).
    Cells with k > N are skipped and listed in ``metadata['skipped']``.
    """
    started = time.time()
    tasks, skipped = [], []
    for n in cfg.n_grid:
        if n > cfg.p:
            raise ValueError(f"N={n} exceeds P={cfg.p}")
        for k in cfg.k_values(n):
            if k > n or k < 1:
                skipped.append((n, k))
                continue
            tasks.extend((n, k, rep) for rep in range(cfg.replications))
    results = _map(lambda t: _phase_replicate(cfg, *t, rules), tasks, n_jobs)
    records = [r for recs in results for r in recs]
    meta = {"experiment": "phase_transition", "config": asdict(cfg), "rules": list(rules),
            "skipped": skipped, "runtime_s": time.time() - started}
    return ExperimentReport.from_records(records, cell_keys=("n", "k", "delta", "rho"), metadata=meta)


# ---------------------------------------------------------------------------
# correlated synthetic study


@dataclass
class SyntheticConfig:
    n: int = 100
    p: int = 1000
    omega: float = 0.0
    theta: float = 0.5
    snr: float = 1.0
    replications: int = 100
    seed: int = 0
    sigma: float = 1.0
    m: int = DEFAULT_M

    def __post_init__(self):
        if not 0 <= self.omega < 1:
            raise ValueError("omega must lie in [0, 1)")
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if self.n_nonzero > self.p:
            raise ValueError("ceil(N^theta) exceeds P")

    @property
    def n_nonzero(self) -> int:
        return math.ceil(round(self.n ** self.theta, 9))


def laplace_inversion(rng: np.random.Generator, size: int, scale: float = 1.0) -> np.ndarray:
    """Laplace(0, scale) draws by inverting the CDF of a uniform draw."""
    u = rng.uniform(-0.5, 0.5, size)
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def equicorrelated_design(rng, n: int, p: int, omega: float) -> np.ndarray:
    """Rows i.i.d. N(0, (1 - omega) I + omega 11^T)."""
    Z = rng.standard_normal((n, p))
    if omega == 0:
        return Z
    return math.sqrt(1 - omega) * Z + math.sqrt(omega) * rng.standard_normal((n, 1))


def signal_quadratic(beta, omega) -> float:
    """beta^T Sigma_omega beta for the equicorrelation matrix."""
    return (1 - omega) * float(beta @ beta) + omega * float(beta.sum()) ** 2


def draw_synthetic(cfg: SyntheticConfig, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """One data set: (X, y, beta0, redraws)."""
    X = equicorrelated_design(rng, cfg.n, cfg.p, cfg.omega)
    k = cfg.n_nonzero
    for redraws in range(MAX_REDRAWS + 1):
        idx = rng.choice(cfg.p, size=k, replace=False)
        beta0 = np.zeros(cfg.p)
        beta0[idx] = laplace_inversion(rng, k)
        q = signal_quadratic(beta0, cfg.omega)
        if q > 0:
            break
    else:
        raise RuntimeError(f"could not draw a nonzero signal in {MAX_REDRAWS} redraws")
    beta0 *= math.sqrt(cfg.snr * cfg.sigma**2 / q)
    y = X @ beta0 + cfg.sigma * rng.standard_normal(cfg.n)
    return X, y, beta0, redraws


def _synthetic_replicate(cfg: SyntheticConfig, rep: int, rules, cell) -> list[dict]:
    rng = _stream(cfg.seed, *cell, rep)
    X, y, beta0, redraws = draw_synthetic(cfg, rng)
    truth = np.flatnonzero(beta0)
    problem = LassoProblem(X, y)
    sigma_hat = math.nan
    if SIGMA_RULES & set(rules):
        sigma_hat = rcv_variance(problem.design, y, seed=_subseed(rng)).sigma
    chosen = _select_all(problem, rules, sigma_hat, _subseed(rng), cfg.m)
    recs = []
    for rule, (lam, active, _) in chosen.items():
        tpr, fdr = tpr_fdr(active, truth)
        recs.append({
            "omega": cfg.omega, "theta": cfg.theta, "snr": cfg.snr, "replicate": rep, "rule": rule,
            "lambda": lam, "tpr": tpr, "fdr": fdr, "support_size": len(active),
            "oracle_inclusive": oracle_inclusive(active, truth),
            "sigma_hat": sigma_hat if rule in SIGMA_RULES else math.nan,
            "snr_realized": signal_quadratic(beta0, cfg.omega) / cfg.sigma**2,
            "redraws": redraws,
        })
    return recs


def run_synthetic(cfg: SyntheticConfig, rules=("cv", "qut", "bic", "sure", "scaled_lasso"),
                  n_jobs: int | None = None) -> ExperimentReport:
    """Equicorrelated-design simulation for one (omega, theta, snr) cell.

    The noise level used by QUT, BIC and SURE is estimated by RCV on each
    replicate; CV and the scaled lasso do not need it.
    """
    started = time.time()
    # cell key from the parameter values, so a cell's stream is the same in any sweep
    cell = (round(cfg.omega * 1e6), round(cfg.theta * 1e6), round(cfg.snr * 1e6))
    results = _map(lambda rep: _synthetic_replicate(cfg, rep, rules, cell), range(cfg.replications), n_jobs)
    records = [r for recs in results for r in recs]
    meta = {"experiment": "synthetic", "config": asdict(cfg), "rules": list(rules), "runtime_s": time.time() - started}
    return ExperimentReport.from_records(records, cell_keys=("omega", "theta", "snr"), metadata=meta)


def run_synthetic_sweep(configs, rules=("cv", "qut", "bic", "sure", "scaled_lasso"), n_jobs=None) -> ExperimentReport:
    reports = [run_synthetic(c, rules, n_jobs) for c in configs]
    return concat_reports(reports)


def concat_reports(reports) -> ExperimentReport:
    import pandas as pd

    records = pd.concat([r.records for r in reports], ignore_index=True)
    meta = {"parts": [r.metadata for r in reports]}
    return ExperimentReport.from_records(records.to_dict(orient="records"), reports[0].cell_keys, meta)


# ---------------------------------------------------------------------------
# tabular data and the split harness


@dataclass
class TabularDataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list
    response_name: str

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


def read_numeric_csv(path) -> tuple[list, np.ndarray]:
    """Header row plus numeric rows; ragged rows are rejected."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return [h.strip() for h in header], np.array(rows, dtype=float).reshape(len(rows), len(header))


def load_dataset(path, response: str) -> TabularDataset:
    header, values = read_numeric_csv(path)
    if response not in header:
        raise ValueError(f"response column {response!r} not in {Path(path).name}")
    j = header.index(response)
    keep = [i for i in range(len(header)) if i != j]
    return TabularDataset(values[:, keep], values[:, j], [header[i] for i in keep], response)


def _split_replicate(data: TabularDataset, train_fraction, rules, seed, rep, center, m) -> list[dict]:
    rng = _stream(seed, rep)
    n = data.n
    n_train = int(round(train_fraction * n))
    if n_train < 20:
        raise InsufficientData(f"training set of {n_train} rows; need at least 20")
    if n_train >= n:
        raise InsufficientData("no rows left for testing")
    perm = rng.permutation(n)
    train, test = np.sort(perm[:n_train]), np.sort(perm[n_train:])

    design = standardize(data.X[train], center=center)
    X_test = data.X[test]
    if center:
        X_test = X_test - design.column_mean
    X_test = X_test * design.column_scale
    y_shift = data.y[train].mean() if center else 0.0
    y_train = data.y[train] - y_shift
    y_test = data.y[test] - y_shift

    problem = LassoProblem(design, y_train)
    sigma_hat = math.nan
    if SIGMA_RULES & set(rules):
        sigma_hat = rcv_variance(design, y_train, seed=_subseed(rng)).sigma
    chosen = _select_all(problem, rules, sigma_hat, _subseed(rng), m)
    recs = []
    for rule, (lam, active, _) in chosen.items():
        from .model import refit_least_squares

        beta = refit_least_squares(design, y_train, active)
        recs.append({
            "train_fraction": train_fraction, "replicate": rep, "rule": rule, "lambda": lam,
            "support_size": len(active), "predictive_risk": predictive_risk(beta, X_test, y_test),
            "sigma_hat": sigma_hat if rule in SIGMA_RULES else math.nan,
        })
    return recs


def run_split_eval(dataset: TabularDataset, train_fraction: float = 0.5, repetitions: int = 100,
                   rules=("cv", "qut", "bic", "sure", "scaled_lasso"), seed: int = 0, center: bool = True,
                   m: int = DEFAULT_M, n_jobs: int | None = None) -> ExperimentReport:
    """Repeated train/test splits with least-squares refits on each selected support.

    Training covariates are standardized (and, by default, centered along
    with the response, since the models carry no intercept); the same
    transform is applied to the test rows.
    """
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie in (0, 1)")
    started = time.time()
    results = _map(lambda rep: _split_replicate(dataset, train_fraction, rules, seed, rep, center, m),
                   range(repetitions), n_jobs)
    records = [r for recs in results for r in recs]
    meta = {"experiment": "split_eval", "n": dataset.n, "p": dataset.p, "response": dataset.response_name,
            "train_fraction": train_fraction, "repetitions": repetitions, "rules": list(rules), "seed": seed,
            "center": center, "runtime_s": time.time() - started}
    return ExperimentReport.from_records(records, cell_keys=("train_fraction",), metadata=meta)
