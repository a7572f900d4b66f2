"""A small phase diagram: oracle inclusion and OIR over (delta, rho).

Prints the oracle-inclusion frequency and QUT's median OIR per cell. The
default run is small enough for a laptop; pass --reps and --p to scale up.

    python demos/phase_transition.py --reps 10
"""
from __future__ import annotations

import argparse

import numpy as np
import pandas as pd

from qutlasso import PhaseTransitionConfig, run_phase_transition

parser = argparse.ArgumentParser()
parser.add_argument("--p", type=int, default=100)
parser.add_argument("--reps", type=int, default=10)
parser.add_argument("--seed", type=int, default=0)
args = parser.parse_args()

n_grid = [args.p * f // 10 for f in (2, 4, 6, 8)]
cfg = PhaseTransitionConfig(p=args.p, n_grid=n_grid, replications=args.reps, seed=args.seed)
report = run_phase_transition(cfg, rules=("qut", "oracle"))
s = report.summary

# each N has its own k grid, so group rho into bins of width 0.1
s = s.assign(rho_bin=pd.cut(s.rho, np.linspace(0, 1, 11)), delta=s.n / args.p)
pd.set_option("display.width", 120)
incl = s[s.rule == "oracle"].pivot_table(index="rho_bin", columns="delta", values="oracle_inclusive_mean",
                                         observed=False)
qut_oir = s[s.rule == "qut"].pivot_table(index="rho_bin", columns="delta", values="oir_median", observed=False)
print("oracle inclusion frequency (rows rho, columns delta)")
print(incl.round(2).to_string())
print("\nQUT median OIR")
print(qut_oir.round(2).to_string())
print(f"\n{len(report.records)} records in {report.metadata['runtime_s']:.1f}s")
