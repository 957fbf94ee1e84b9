"""Sparse covariance estimation under FDR-screened sparsity patterns.

Pipeline: correlation screening with step-up FDR control gives a pattern,
a constrained Gaussian MLE is fitted by block coordinate descent or by a
proximal distance method, and EBIC picks the FDR level.
"""

from .bcd import BcdConfig, bcd_fit, bcd_fit_l0
from .core import CovEstimate, SampleCov, log_likelihood, neg_log_likelihood, sample_covariance
from .errors import (
    DegenerateVariableError,
    InputError,
    InternalStateError,
    NotPositiveDefiniteError,
    SparseCovError,
)
from .experiment import run_experiment
from .fdr import FdrConfig, fdr_pattern, pattern_to_dot, pattern_to_json, screening_statistics
from .pd import PdConfig, pd_fit
from .selection import DEFAULT_GRID, EbicReport, alpha_path, ebic_score, select_alpha
from .synth import TruthSpec, confusion_and_mcc, gen_sparse_spd, mcc, nrmse, sample_gaussian

__version__ = "0.1.0"

__all__ = [
    "BcdConfig", "CovEstimate", "DEFAULT_GRID", "DegenerateVariableError", "EbicReport", "FdrConfig",
    "InputError", "InternalStateError", "NotPositiveDefiniteError", "PdConfig", "SampleCov",
    "SparseCovError", "TruthSpec", "alpha_path", "bcd_fit", "bcd_fit_l0", "confusion_and_mcc",
    "ebic_score", "fdr_pattern", "gen_sparse_spd", "log_likelihood", "mcc", "neg_log_likelihood",
    "nrmse", "pattern_to_dot", "pattern_to_json", "pd_fit", "run_experiment", "sample_covariance",
    "sample_gaussian", "screening_statistics", "select_alpha",
]
