"""QUT against CV, BIC, SURE and the scaled lasso on equicorrelated designs.

The noise level for QUT, BIC and SURE is estimated by refitted cross
validation on each replicate.

    python demos/selector_comparison.py --reps 10
"""
from __future__ import annotations

import argparse

from qutlasso import SyntheticConfig, run_synthetic

parser = argparse.ArgumentParser()
parser.add_argument("--n", type=int, default=100)
parser.add_argument("--p", type=int, default=300)
parser.add_argument("--reps", type=int, default=10)
parser.add_argument("--omega", type=float, default=0.0)
parser.add_argument("--snr", type=float, default=1.0)
args = parser.parse_args()

cfg = SyntheticConfig(n=args.n, p=args.p, omega=args.omega, theta=0.5, snr=args.snr, replications=args.reps)
df = run_synthetic(cfg).records
table = df.groupby("rule")[["tpr", "fdr", "support_size"]].median()
print(f"N={cfg.n} P={cfg.p} omega={cfg.omega} snr={cfg.snr}, {cfg.n_nonzero} nonzero, {cfg.replications} reps")
print(table.round(3).to_string())
print(f"median RCV sigma: {df.sigma_hat.median():.3f}")
