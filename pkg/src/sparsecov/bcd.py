"""Cyclic block coordinate descent over 2x2 principal blocks.

For a block A = {u, v} with complement B, write

    Phi   = Sigma_BB^{-1} Sigma_BA
    Psi   = Sigma_AB Phi
    Theta = S_AA - S_AB Phi - Phi^T S_BA + Phi^T S_BB Phi

and ``Sbar = Sigma_AA - Psi`` (the Schur complement). With everything but
Sigma_AA fixed the objective reduces, up to a constant, to

    g(Sbar) = tr(Theta Sbar^{-1}) + log det Sbar,

minimised by ``Sbar = Theta`` when the pair is free. When the pair must be
zero, ``Sbar_12 = -Psi_12`` and ``Sbar_11`` solves a cubic, with
``Sbar_22 = (Theta_22 / Theta_11) Sbar_11``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .core import (
    CovEstimate,
    SampleCov,
    check_symmetric,
    is_spd,
    neg_log_likelihood,
    relative_change,
    spd_inverse,
    symmetrize,
)
from . import _kernels
from .cubic import cubic_positive_roots
from .errors import InputError, InternalStateError, NotPositiveDefiniteError
from .fdr import validate_pattern

ROOT_TIE_TOL = 1e-12


@dataclass(frozen=True)
class BcdConfig:
    """Stopping rule and initialisation for :func:`bcd_fit`.

    ``method="direct"`` re-solves with a Cholesky factor of Sigma_BB for every
    block; ``"incremental"`` carries Sigma^{-1} along with O(p^2) rank-2
    updates, refreshes it from scratch once per sweep, and runs compiled
    unless a per-block callback is requested.
    """

    epsilon: float = 1e-7
    max_sweeps: int = 500
    seed: int | None = None
    init: str = "shrunk"
    shrink: float = 0.1
    method: str = "incremental"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.max_sweeps < 1:
            raise InputError("max_sweeps must be >= 1")
        if self.init not in ("shrunk", "random"):
            raise InputError(f"unknown init {self.init!r}")
        if self.method not in ("direct", "incremental"):
            raise InputError(f"unknown method {self.method!r}")


@dataclass
class BlockQuantities:
    Phi: np.ndarray
    Psi: np.ndarray
    Theta: np.ndarray


def _S(S) -> np.ndarray:
    return S.S if isinstance(S, SampleCov) else np.asarray(S, dtype=float)


def block_quantities(sigma: np.ndarray, S, u: int, v: int) -> BlockQuantities:
    """Phi, Psi and Theta for the block {u, v}; u and v come first in the ordering."""
    S = _S(S)
    p = sigma.shape[0]
    if not (0 <= u < p and 0 <= v < p and u != v):
        raise InputError(f"invalid block ({u}, {v}) for p={p}")
    A = [u, v]
    if p == 2:
        return BlockQuantities(Phi=np.zeros((0, 2)), Psi=np.zeros((2, 2)), Theta=S[np.ix_(A, A)].copy())
    B = [k for k in range(p) if k != u and k != v]
    sig_BB = sigma[np.ix_(B, B)]
    sig_BA = sigma[np.ix_(B, A)]
    try:
        factor = scipy.linalg.cho_factor(sig_BB, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InternalStateError("Sigma_BB lost positive definiteness") from exc
    Phi = scipy.linalg.cho_solve(factor, sig_BA, check_finite=False)
    Psi = symmetrize(sig_BA.T @ Phi)
    S_AB = S[np.ix_(A, B)]
    Theta = S[np.ix_(A, A)] - S_AB @ Phi - Phi.T @ S_AB.T + Phi.T @ S[np.ix_(B, B)] @ Phi
    return BlockQuantities(Phi=Phi, Psi=Psi, Theta=symmetrize(Theta))


def block_objective(Theta: np.ndarray, sigma_bar: np.ndarray) -> float:
    """``tr(Theta Sbar^{-1}) + log det Sbar``; +inf outside the SPD cone."""
    a, c, b = sigma_bar[0, 0], sigma_bar[0, 1], sigma_bar[1, 1]
    det = a * b - c * c
    if not (a > 0 and det > 0):
        return np.inf
    tr = (Theta[0, 0] * b - 2.0 * Theta[0, 1] * c + Theta[1, 1] * a) / det
    return float(tr + np.log(det))


def free_block_update(q: BlockQuantities) -> np.ndarray:
    return symmetrize(q.Theta + q.Psi)


def constrained_schur_solution(q: BlockQuantities) -> np.ndarray:
    """Minimiser of g over Sbar with ``Sbar_12 = -Psi_12`` (zero off-diagonal in Sigma_AA)."""
    t11, t12, t22 = q.Theta[0, 0], q.Theta[0, 1], q.Theta[1, 1]
    psi = q.Psi[0, 1]
    if not (t11 > 0 and t22 > 1e-14 * t11):
        raise InternalStateError(f"Theta is not positive definite (diag {t11}, {t22})")
    ratio = t22 / t11
    roots = cubic_positive_roots(t22, -t22 * t11, -t11 * (psi * psi + 2.0 * t12 * psi), -psi * psi * t11 * t11)

    best, best_val = None, np.inf
    for a in roots:
        cand = np.array([[a, -psi], [-psi, ratio * a]])
        val = block_objective(q.Theta, cand)
        if not np.isfinite(val):
            continue
        # ties go to the larger root, roots arrive ascending
        if best is None or val <= best_val + ROOT_TIE_TOL * max(1.0, abs(best_val)):
            best, best_val = cand, min(val, best_val)
    if best is None:
        raise InternalStateError("no admissible positive root for the constrained block")
    return best


def constrained_block_update(q: BlockQuantities) -> np.ndarray:
    sbar = constrained_schur_solution(q)
    block = np.diag([sbar[0, 0] + q.Psi[0, 0], sbar[1, 1] + q.Psi[1, 1]])
    return block


def l0_block_update(q: BlockQuantities, lam: float) -> np.ndarray:
    """Better of the zero-pair and free-pair block under ``g + lam * ||Sigma||_0``.

    The free candidate carries two more non-zero off-diagonal entries (both
    triangles), i.e. an extra ``2 * lam``.
    """
    if lam < 0:
        raise InputError("penalty must be non-negative")
    free_val = block_objective(q.Theta, q.Theta) + 2.0 * lam
    sbar = constrained_schur_solution(q)
    zero_val = block_objective(q.Theta, sbar)
    if zero_val < free_val:
        return np.diag([sbar[0, 0] + q.Psi[0, 0], sbar[1, 1] + q.Psi[1, 1]])
    return free_block_update(q)


# ---------------------------------------------------------------- driver


def default_init(S: np.ndarray, Z: np.ndarray, shrink: float = 0.1) -> np.ndarray:
    """``diag(S)`` plus pattern-masked off-diagonals ``shrink * S_ij``, repaired to SPD."""
    p = S.shape[0]
    sigma = shrink * S * Z
    np.fill_diagonal(sigma, np.diag(S))
    sigma = symmetrize(sigma)
    tau = 1e-8 * np.trace(S) / p
    if tau <= 0:
        tau = 1e-8
    while not is_spd(sigma):
        sigma = sigma + tau * np.eye(p)
        tau *= 2.0
    return sigma


def random_init(S: np.ndarray, Z: np.ndarray, seed) -> np.ndarray:
    """Random SPD matrix supported on ``Z`` (diagonally dominant, scaled to S)."""
    rng = np.random.default_rng(seed)
    p = S.shape[0]
    B = rng.uniform(-1.0, 1.0, size=(p, p))
    B = np.triu(B, 1)
    B = (B + B.T) * (Z != 0)
    np.fill_diagonal(B, np.abs(B).sum(axis=1) + 1.0)
    scale = float(np.mean(np.diag(S))) or 1.0
    return scale * B / np.max(np.diag(B))


def _check_start(sigma0, Z) -> np.ndarray:
    sigma0 = check_symmetric(sigma0, "initial estimate").copy()
    if np.any((sigma0 != 0) & (Z == 0)):
        raise InputError("initial estimate has non-zeros outside the pattern")
    if not is_spd(sigma0):
        raise NotPositiveDefiniteError("initial estimate is not positive definite")
    return symmetrize(sigma0)


def _set_block(sigma, u, v, block):
    sigma[u, u] = block[0, 0]
    sigma[v, v] = block[1, 1]
    sigma[u, v] = sigma[v, u] = block[0, 1]


def _sweep_direct(sigma, S, update, on_block):
    p = sigma.shape[0]
    for u in range(p - 1):
        for v in range(u + 1, p):
            q = block_quantities(sigma, S, u, v)
            _set_block(sigma, u, v, update(u, v, q))
            if on_block is not None:
                on_block(sigma)


def _sweep_incremental(sigma, S, update, on_block):
    p = sigma.shape[0]
    K = spd_inverse(sigma)
    for u in range(p - 1):
        for v in range(u + 1, p):
            A = [u, v]
            KA = K[:, A]
            KAA = KA[A]
            sbar_old = np.linalg.inv(KAA)
            W = KA @ sbar_old  # rows A are the identity, rows B are -Phi
            Theta = symmetrize(W.T @ S @ W)
            Psi = symmetrize(sigma[np.ix_(A, A)] - sbar_old)
            Phi = -np.delete(W, A, axis=0)
            block = update(u, v, BlockQuantities(Phi=Phi, Psi=Psi, Theta=Theta))
            _set_block(sigma, u, v, block)
            sbar_new = np.array([[block[0, 0], block[0, 1]], [block[1, 0], block[1, 1]]]) - Psi
            delta = np.linalg.inv(sbar_new) - KAA
            K += W @ delta @ W.T
            K = symmetrize(K)
            if on_block is not None:
                on_block(sigma)


def _compiled_sweep(Z, lam, use_l0):
    Zc = np.ascontiguousarray(Z, dtype=np.int8)

    def sweep(sigma, S, update, on_block):
        K = spd_inverse(sigma)
        code = _kernels.bcd_sweep(sigma, K, S, Zc, float(lam), use_l0)
        if code != _kernels.OK:
            raise InternalStateError(f"block update failed (code {code})")

    return sweep


def _run_sweeps(S, sigma, cfg, update, objective, on_block, compiled=None):
    if cfg.method == "direct":
        sweep = _sweep_direct
    elif on_block is None and compiled is not None:
        sweep = compiled
    else:
        sweep = _sweep_incremental
    trace = [objective(sigma)]
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        old = sigma.copy()
        sweep(sigma, S, update, on_block)
        trace.append(objective(sigma))
        if relative_change(sigma, old) < cfg.epsilon:
            converged = True
            break
    return sigma, trace, sweeps, converged


def bcd_fit(
    S,
    Z,
    cfg: BcdConfig | None = None,
    sigma0: np.ndarray | None = None,
    on_block: Callable[[np.ndarray], None] | None = None,
) -> CovEstimate:
    """Constrained MLE of Sigma with zeros wherever ``Z`` is zero.

    Blocks are visited cyclically, u = 0..p-2, v = u+1..p-1, and the
    relative Frobenius change is tested after each full sweep. ``on_block``
    (if given) is called with the working matrix after every block update.
    """
    cfg = cfg or BcdConfig()
    S = np.ascontiguousarray(check_symmetric(_S(S), "sample covariance"))
    p = S.shape[0]
    Z = validate_pattern(Z, p)
    if sigma0 is None:
        sigma0 = random_init(S, Z, cfg.seed) if cfg.init == "random" else default_init(S, Z, cfg.shrink)
    sigma = _check_start(sigma0, Z)

    def update(u, v, q):
        return free_block_update(q) if Z[u, v] else constrained_block_update(q)

    sigma, trace, sweeps, converged = _run_sweeps(
        S, sigma, cfg, update, lambda m: neg_log_likelihood(m, S), on_block,
        compiled=_compiled_sweep(Z, 0.0, False),
    )
    return CovEstimate(
        sigma=sigma, objective=trace[-1], iterations=sweeps, converged=converged, trace=trace,
        info={"solver": "bcd", "method": cfg.method},
    )


def l0_objective(sigma: np.ndarray, S: np.ndarray, lam: float) -> float:
    """``f(Sigma) + lam * (number of non-zero off-diagonal entries)``."""
    off = np.count_nonzero(sigma) - np.count_nonzero(np.diag(sigma))
    return neg_log_likelihood(sigma, S) + lam * off


def bcd_fit_l0(
    S,
    lam: float,
    cfg: BcdConfig | None = None,
    sigma0: np.ndarray | None = None,
    on_block: Callable[[np.ndarray], None] | None = None,
) -> CovEstimate:
    """BCD on the l0-penalised likelihood; no sparsity pattern is needed.

    Starts from ``diag(S)`` unless ``sigma0`` is given.
    """
    cfg = cfg or BcdConfig()
    S = np.ascontiguousarray(check_symmetric(_S(S), "sample covariance"))
    p = S.shape[0]
    full = np.ones((p, p), dtype=np.int8)
    sigma = _check_start(np.diag(np.diag(S)) if sigma0 is None else sigma0, full)

    sigma, trace, sweeps, converged = _run_sweeps(
        S, sigma, cfg, lambda u, v, q: l0_block_update(q, lam), lambda m: l0_objective(m, S, lam), on_block,
        compiled=_compiled_sweep(full, lam, True),
    )
    return CovEstimate(
        sigma=sigma, objective=trace[-1], iterations=sweeps, converged=converged, trace=trace,
        info={"solver": "bcd_l0", "lambda": lam, "method": cfg.method},
    )
