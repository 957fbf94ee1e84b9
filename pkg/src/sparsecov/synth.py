"""Synthetic ground truth, Gaussian sampling and evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import cholesky
from .errors import InputError

RNG_NAME = "numpy.random.Generator(PCG64)"


@dataclass(frozen=True)
class TruthSpec:
    """Target dimension, fraction of zero off-diagonal entries and condition number."""

    p: int
    sparsity: float
    cond: float = 100.0
    seed: int | np.random.Generator | None = None

    def __post_init__(self):
        if self.p < 2:
            raise InputError("p must be >= 2")
        if not 0.0 <= self.sparsity <= 1.0:
            raise InputError("sparsity must lie in [0, 1]")
        if not self.cond > 1.0:
            raise InputError("condition number must exceed 1")


@dataclass(frozen=True)
class ConfusionCounts:
    TP: int
    TN: int
    FP: int
    FN: int

    @property
    def total(self) -> int:
        return self.TP + self.TN + self.FP + self.FN


def gen_sparse_spd(spec: TruthSpec) -> np.ndarray:
    """Random sparse SPD matrix with the requested sparsity and condition number.

    ``round((1 - sparsity) * M)`` off-diagonal pairs are chosen uniformly and
    filled with U(-1, 1) values; the diagonal is U(-1, 1) too. A multiple of
    the identity is then added so that ``lambda_max / lambda_min == cond``.
    """
    rng = np.random.default_rng(spec.seed)
    p = spec.p
    M = p * (p - 1) // 2
    n_edges = int(round((1.0 - spec.sparsity) * M))
    i, j = np.triu_indices(p, 1)
    chosen = rng.choice(M, size=n_edges, replace=False)
    B = np.zeros((p, p))
    vals = rng.uniform(-1.0, 1.0, size=n_edges)
    B[i[chosen], j[chosen]] = vals
    B = B + B.T
    B[np.diag_indices(p)] = rng.uniform(-1.0, 1.0, size=p)
    w = np.linalg.eigvalsh(B)
    lo, hi = w[0], w[-1]
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        # all eigenvalues equal (e.g. a constant diagonal): only a scaling is possible
        sigma = np.diag(np.linspace(1.0, spec.cond, p))
        return sigma
    shift = (hi - spec.cond * lo) / (spec.cond - 1.0)
    sigma = B + shift * np.eye(p)
    cholesky(sigma)
    return sigma


def sample_gaussian(sigma_true: np.ndarray, n: int, seed=None) -> np.ndarray:
    """``p x n`` matrix of zero-mean Gaussian samples ``L @ eta`` with ``L L^T = sigma_true``."""
    if n < 1:
        raise InputError("n must be positive")
    L = cholesky(np.asarray(sigma_true, dtype=float))
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eta = rng.standard_normal((L.shape[0], n))
    return L @ eta


def nrmse(sigma_true: np.ndarray, sigma_hat: np.ndarray) -> float:
    """``||sigma_true - sigma_hat||_F / ||sigma_true||_F``."""
    sigma_true = np.asarray(sigma_true, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if sigma_true.shape != sigma_hat.shape:
        raise InputError("shape mismatch")
    denom = np.linalg.norm(sigma_true)
    if denom == 0:
        raise InputError("true matrix has zero norm")
    return float(np.linalg.norm(sigma_true - sigma_hat) / denom)


def confusion_counts(truth: np.ndarray, estimate: np.ndarray) -> ConfusionCounts:
    """Counts over strict upper-triangle pairs; "positive" means a non-zero entry."""
    truth = np.asarray(truth)
    estimate = np.asarray(estimate)
    if truth.shape != estimate.shape:
        raise InputError("shape mismatch")
    i, j = np.triu_indices(truth.shape[0], 1)
    t = truth[i, j] != 0
    e = estimate[i, j] != 0
    return ConfusionCounts(
        TP=int(np.sum(t & e)), TN=int(np.sum(~t & ~e)), FP=int(np.sum(~t & e)), FN=int(np.sum(t & ~e))
    )


def mcc(counts: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any marginal is empty."""
    tp, tn, fp, fn = counts.TP, counts.TN, counts.FP, counts.FN
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return float((tp * tn - fp * fn) / math.sqrt(denom))


def confusion_and_mcc(truth: np.ndarray, estimate: np.ndarray) -> tuple[ConfusionCounts, float]:
    counts = confusion_counts(truth, estimate)
    return counts, mcc(counts)
