"""Lasso with the quantile universal threshold.

The lasso penalty is set to a high quantile of ``||X^T e||_inf`` under the
null model, so that pure noise yields the empty model with high probability.
Competing selectors (CV, BIC, SURE, scaled lasso), noise-variance estimators,
selection metrics and the simulation protocols live alongside.
"""
from .abel import abel_setup, build_abel, haar_synthesis, run_abel_experiment
from .errors import (
    ConvergenceWarning,
    DegreesOfFreedomExhausted,
    DimensionMismatch,
    InsufficientData,
    InvalidDimension,
    InvalidFolds,
    InvalidSize,
    NonFiniteInput,
    QutError,
    SigmaCollapse,
    TooFewReplicates,
)
from .experiments import (
    PhaseTransitionConfig,
    SyntheticConfig,
    TabularDataset,
    load_dataset,
    run_phase_transition,
    run_split_eval,
    run_synthetic,
)
from .metrics import oir, oracle_inclusive, predictive_risk, signal_mse, smallest_oracle_support, tpr_fdr
from .model import (
    DesignMatrix,
    LassoFit,
    LassoProblem,
    TrueModel,
    fit_lasso,
    lambda_max,
    lasso_path,
    refit_least_squares,
    soft_threshold,
    standardize,
)
from .report import ExperimentReport
from .selectors import (
    LambdaGrid,
    SelectionOutcome,
    lambda_grid,
    select_bic,
    select_cv,
    select_qut,
    select_scaled_lasso,
    select_sure,
)
from .thresholds import NullQuantileEstimate, alpha_p, qut_monte_carlo, universal_threshold
from .variance import VarianceEstimate, rcv_variance, residual_variance

__version__ = "0.1.0"
