"""The quantile universal threshold on a random design and on the identity.

For X = I the null statistic is the maximum of N absolute normals, so the
Monte Carlo threshold can be checked against the exact quantile and against
the universal threshold sqrt(2 ln N).

    python demos/qut_threshold.py
"""
from __future__ import annotations

from statistics import NormalDist

import numpy as np

from qutlasso import alpha_p, fit_lasso, qut_monte_carlo, universal_threshold

n = 512
est = qut_monte_carlo(np.eye(n), m=20_000, seed=0, keep_samples=False)
q = 1 - alpha_p(n)
exact = NormalDist().inv_cdf((1 + q ** (1 / n)) / 2)
print(f"identity, N={n}: alpha_P={est.alpha:.4f}")
print(f"  Monte Carlo lambda_QUT = {est.lambda_qut:.4f}")
print(f"  exact quantile         = {exact:.4f}")
print(f"  sqrt(2 ln N)           = {universal_threshold(n):.4f}")

# a Gaussian design: under the null the lasso at lambda_QUT returns zero
# with probability about 1 - alpha_P
rng = np.random.default_rng(1)
X = rng.standard_normal((100, 200))
est = qut_monte_carlo(X, m=1000, seed=1)
zero = np.mean([not np.any(fit_lasso(X, rng.standard_normal(100), est.lambda_qut).beta) for _ in range(300)])
print(f"\nGaussian 100x200: lambda_QUT={est.lambda_qut:.3f}, empty fits under the null {zero:.3f} "
      f"(target {1 - est.alpha:.3f})")

# with signal, the same threshold keeps the strong coefficients
beta = np.zeros(200)
beta[:5] = [6, -5, 5, 4, -4]
y = X @ beta + rng.standard_normal(100)
fit = fit_lasso(X, y, est.lambda_qut)
print(f"with 5 true coefficients: selected {fit.active_set.tolist()}")
print(f"KKT violation {fit.kkt_violation:.1e} after {fit.iterations} sweeps")
