"""Matrix types, the Gaussian likelihood objective and dense linear algebra helpers.

Every symmetric matrix handed back by this package is stored exactly
symmetric, and "SPD" means "a Cholesky factorization with positive pivots
succeeds".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg

from .errors import InputError, NotPositiveDefiniteError

SYM_RTOL = 1e-12

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class SampleCov:
    """Sample covariance ``S = Y Y^T / n`` together with the sample count."""

    S: np.ndarray
    n: int

    @property
    def p(self) -> int:
        return self.S.shape[0]


@dataclass
class CovEstimate:
    """Result of a constrained MLE fit.

    ``trace`` holds the objective after every sweep (BCD) or iteration (PD);
    solver-specific diagnostics go into ``info``.
    """

    sigma: np.ndarray
    objective: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    alpha: float | None = None
    info: dict[str, Any] = field(default_factory=dict)


def as_data_matrix(Y, min_samples: int = 3) -> np.ndarray:
    """Validate a ``p x n`` data matrix (rows are variables).

    Three samples are the minimum for the correlation t-test; plain moment
    computations can pass a smaller ``min_samples``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise InputError(f"data matrix must be 2-D, got shape {Y.shape}")
    p, n = Y.shape
    if p < 2:
        raise InputError(f"need at least 2 variables, got p={p}")
    if n < min_samples:
        raise InputError(f"need at least {min_samples} samples, got n={n}")
    if not np.all(np.isfinite(Y)):
        raise InputError("data matrix contains non-finite entries")
    return Y


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def check_symmetric(A, name: str = "matrix") -> np.ndarray:
    """Validate a square finite matrix that is symmetric up to rounding; returns it symmetrized."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    scale = max(np.abs(A).max(initial=0.0), 1e-300)
    if np.abs(A - A.T).max(initial=0.0) > SYM_RTOL * scale:
        raise InputError(f"{name} is not symmetric")
    return symmetrize(A)


def sample_covariance(Y, center: bool = False) -> SampleCov:
    """Second-moment matrix of the columns of ``Y``.

    No mean is removed unless ``center`` is set; the model assumes
    zero-mean data.
    """
    Y = as_data_matrix(Y, min_samples=1)
    if center:
        Y = Y - Y.mean(axis=1, keepdims=True)
    n = Y.shape[1]
    S = symmetrize(Y @ Y.T / n)
    return SampleCov(S=S, n=n)


def cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises :class:`NotPositiveDefiniteError`."""
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc
    if not np.all(np.diag(L) > 0):
        raise NotPositiveDefiniteError("Cholesky pivot is not positive")
    return L


def is_spd(sigma: np.ndarray) -> bool:
    try:
        cholesky(sigma)
    except NotPositiveDefiniteError:
        return False
    return True


def spd_inverse(sigma: np.ndarray) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor, symmetrized."""
    L = cholesky(sigma)
    Linv = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return symmetrize(Linv.T @ Linv)


def neg_log_likelihood(sigma, S) -> float:
    """``log det(sigma) + tr(sigma^{-1} S)``, the objective minimised by the solvers."""
    if isinstance(S, SampleCov):
        S = S.S
    L = cholesky(np.asarray(sigma, dtype=float))
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    # tr(sigma^{-1} S) = tr(L^{-1} S L^{-T})
    X = scipy.linalg.solve_triangular(L, np.asarray(S, dtype=float), lower=True)
    X = scipy.linalg.solve_triangular(L, X.T, lower=True)
    return float(logdet + np.trace(X))


def log_likelihood(sigma, S, n: int, p: int | None = None) -> float:
    """Gaussian log-likelihood of ``n`` zero-mean samples with sample covariance ``S``."""
    if isinstance(S, SampleCov):
        S = S.S
    if p is None:
        p = np.asarray(S).shape[0]
    return -0.5 * p * n * LOG_2PI - 0.5 * n * neg_log_likelihood(sigma, S)


def sym_eigendecomposition(A) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and matching orthonormal eigenvectors (columns)."""
    A = check_symmetric(A, "eigendecomposition input")
    w, V = np.linalg.eigh(symmetrize(A))
    return w[::-1].copy(), V[:, ::-1].copy()


def lambda_max(S: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD matrix."""
    p = S.shape[0]
    if p <= 200:
        return float(np.linalg.eigvalsh(S)[-1])
    return float(scipy.linalg.eigh(S, eigvals_only=True, subset_by_index=[p - 1, p - 1])[0])


def relative_change(new: np.ndarray, old: np.ndarray) -> float:
    denom = np.linalg.norm(old)
    if denom == 0.0:
        return float(np.linalg.norm(new - old))
    return float(np.linalg.norm(new - old) / denom)
