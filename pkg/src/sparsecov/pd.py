"""Proximal distance majorization-minimization for the constrained MLE.

Minimises ``f(Sigma) + rho/2 * dist^2(Sigma, C)`` while driving ``rho`` up
geometrically. Each step majorizes the distance term by the distance to the
projection of the current iterate and linearizes the concave parts of ``f``
(after splitting off ``nu * tr(Sigma^{-1})`` with ``nu = lambda_max(S)``),
leaving

    min_Sigma  tr(A Sigma) + nu * tr(Sigma^{-1}) + rho/2 * ||Sigma||_F^2

which is solved in the eigenbasis of ``A``: eigenvalue ``e`` of ``A`` maps to
the positive root of ``rho l^3 + e l^2 - nu = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    CovEstimate,
    SampleCov,
    check_symmetric,
    is_spd,
    lambda_max,
    neg_log_likelihood,
    relative_change,
    spd_inverse,
    sym_eigendecomposition,
    symmetrize,
)
from . import _kernels
from .errors import InputError, InternalStateError, NotPositiveDefiniteError
from .fdr import validate_pattern


@dataclass(frozen=True)
class PdConfig:
    """Penalty schedule and stopping rule for :func:`pd_fit`.

    The penalty on level ``l`` (0-based) is ``zeta ** (l + 1)``, capped at
    ``rho_max``; ``rho_fixed`` pins it instead and the run then stops on the
    first step whose relative change is below ``epsilon``.

    Two schedules are available. With ``inner_tol=None`` every level lasts
    ``steps_per_level`` MM steps and the run stops on a step change below
    ``epsilon``. That schedule lags behind the penalized minimizers, because
    an MM step at penalty ``rho`` moves the iterate by roughly ``1/rho`` of
    the remaining distance, so the final error grows with ``zeta - 1``.

    The default instead keeps stepping on one level (with momentum, restarted
    on every level and whenever the penalized objective rises) until
    ``rho * change < inner_tol`` or ``inner_max`` steps have been taken. The
    run stops at the end of the first level whose iterate lies within
    relative distance ``feas_tol`` of the constraint set.
    """

    zeta: float = 1.05
    epsilon: float = 1e-8
    max_iters: int = 200_000
    rho_fixed: float | None = None
    rho_max: float = 1e12
    steps_per_level: int = 1
    inner_tol: float | None = 5e-4
    feas_tol: float = 1e-5
    inner_max: int = 20_000
    accelerate: bool = True

    @property
    def adaptive(self) -> bool:
        return self.inner_tol is not None and self.rho_fixed is None

    def __post_init__(self):
        if not self.zeta > 1.0:
            raise InputError(f"zeta must exceed 1, got {self.zeta}")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.max_iters < 1:
            raise InputError("max_iters must be >= 1")
        if self.rho_fixed is not None and not self.rho_fixed > 0:
            raise InputError("rho_fixed must be positive")
        if self.steps_per_level < 1:
            raise InputError("steps_per_level must be >= 1")
        if self.inner_tol is not None and not self.inner_tol > 0:
            raise InputError("inner_tol must be positive")
        if not self.feas_tol > 0:
            raise InputError("feas_tol must be positive")
        if self.inner_max < self.steps_per_level:
            raise InputError("inner_max must be >= steps_per_level")

    def rho(self, level: int) -> float:
        if self.rho_fixed is not None:
            return float(self.rho_fixed)
        if (level + 1) * np.log(self.zeta) >= np.log(self.rho_max):
            return float(self.rho_max)
        return float(min(self.zeta ** (level + 1), self.rho_max))


@dataclass
class SurrogatePieces:
    nu: float
    A: np.ndarray
    projection: np.ndarray


def project_pattern(sigma: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Zero the entries outside the pattern (the Frobenius projection onto it)."""
    out = np.where(np.asarray(Z) != 0, sigma, 0.0)
    np.fill_diagonal(out, np.diag(sigma))
    return out


def project_cardinality(sigma: np.ndarray, k: int) -> np.ndarray:
    """Keep the diagonal and the ``k`` largest-magnitude off-diagonal pairs.

    Ties at the cut are resolved in favour of the smaller flat upper-triangle
    index.
    """
    p = sigma.shape[0]
    M = p * (p - 1) // 2
    if not 0 <= k <= M:
        raise InputError(f"k must lie in [0, {M}], got {k}")
    i, j = np.triu_indices(p, 1)
    mags = np.abs(sigma[i, j])
    keep = np.lexsort((np.arange(M), -mags))[:k]
    out = np.diag(np.diag(sigma)).astype(float)
    out[i[keep], j[keep]] = sigma[i[keep], j[keep]]
    out[j[keep], i[keep]] = sigma[i[keep], j[keep]]
    return out


def _projector(constraint, p: int) -> tuple[Callable[[np.ndarray], np.ndarray], dict]:
    if isinstance(constraint, (int, np.integer)):
        k = int(constraint)
        if not 0 <= k <= p * (p - 1) // 2:
            raise InputError(f"k must lie in [0, {p * (p - 1) // 2}], got {k}")
        return (lambda m: project_cardinality(m, k)), {"mode": "cardinality", "k": k}
    Z = validate_pattern(constraint, p)
    return (lambda m: project_pattern(m, Z)), {"mode": "pattern"}


def build_surrogate(sigma_t, S, rho: float, projection: np.ndarray, nu: float | None = None) -> SurrogatePieces:
    """``A = K - K (S - nu I) K - rho P`` with ``K = sigma_t^{-1}``."""
    if isinstance(S, SampleCov):
        S = S.S
    if not rho > 0:
        raise InputError("rho must be positive")
    try:
        K = spd_inverse(sigma_t)
    except NotPositiveDefiniteError as exc:
        raise InternalStateError("PD iterate lost positive definiteness") from exc
    if nu is None:
        nu = lambda_max(S)
    p = S.shape[0]
    A = K - K @ (S - nu * np.eye(p)) @ K - rho * projection
    return SurrogatePieces(nu=float(nu), A=symmetrize(A), projection=projection)


def eigen_lambda_update(e, nu: float, rho: float):
    """Unique positive root of ``rho l^3 + e l^2 - nu`` (elementwise over ``e``)."""
    if not (nu > 0 and rho > 0):
        raise InputError("nu and rho must be positive")
    e = np.asarray(e, dtype=float)
    scalar = e.ndim == 0
    flat = np.ascontiguousarray(np.atleast_1d(e).ravel())
    lam = _kernels.lambda_roots(flat, float(nu), float(rho), np.empty_like(flat))
    return float(lam[0]) if scalar else lam.reshape(np.shape(e))


def lambda_residual(lam, e, nu: float, rho: float):
    """Scaled residual of the eigenvalue cubic (max |coefficient| * (1 + l^3))."""
    lam = np.asarray(lam, dtype=float)
    e = np.asarray(e, dtype=float)
    scale = np.maximum(np.maximum(rho, np.abs(e)), nu) * (1.0 + lam**3)
    return np.abs((rho * lam + e) * lam * lam - nu) / scale


def surrogate_minimizer(A: np.ndarray, nu: float, rho: float):
    """Minimise ``tr(A X) + nu tr(X^{-1}) + rho/2 ||X||_F^2`` over SPD ``X``.

    Returns ``(X, e, lam, V)`` with ``e`` descending eigenvalues of ``A``,
    ``lam`` the matching eigenvalues of ``X`` and ``V`` the shared eigenvectors.
    """
    e, V = sym_eigendecomposition(A)
    lam = eigen_lambda_update(e, nu, rho)
    X = symmetrize((V * lam) @ V.T)
    return X, e, lam, V


def surrogate_objective(X: np.ndarray, A: np.ndarray, nu: float, rho: float) -> float:
    return float(np.sum(A * X) + nu * np.trace(spd_inverse(X)) + 0.5 * rho * np.sum(X * X))


def penalized_objective(sigma: np.ndarray, S, rho: float, constraint) -> float:
    """``f(sigma) + rho/2 * ||sigma - P_C(sigma)||_F^2``."""
    if isinstance(S, SampleCov):
        S = S.S
    project, _ = _projector(constraint, sigma.shape[0])
    d = sigma - project(sigma)
    return neg_log_likelihood(sigma, S) + 0.5 * rho * float(np.sum(d * d))


def pd_step(sigma_t: np.ndarray, S, constraint, rho: float, nu: float | None = None) -> np.ndarray:
    """One MM step: project, build ``A``, solve in its eigenbasis."""
    if isinstance(S, SampleCov):
        S = S.S
    project, _ = _projector(constraint, S.shape[0])
    pieces = build_surrogate(sigma_t, S, rho, project(sigma_t), nu)
    X, _, _, _ = surrogate_minimizer(pieces.A, pieces.nu, rho)
    return X


def _factor_objective(V, lam, S) -> float:
    """``f(V diag(lam) V^T)`` from the eigenpairs, no factorization needed."""
    return float(np.sum(np.log(lam)) + np.sum(np.einsum("ij,ij->j", V, S @ V) / lam))


def pd_fit(
    S,
    constraint,
    cfg: PdConfig | None = None,
    sigma0: np.ndarray | None = None,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> CovEstimate:
    """Proximal distance fit under a sparsity pattern ``Z`` (array) or a cardinality ``k`` (int).

    Starts from ``diag(S)`` by default. At termination the iterate is
    projected onto the constraint set; ``objective`` is the exact
    likelihood objective of that projected matrix. ``callback(t, sigma, rho)``
    sees every iterate before projection.
    """
    cfg = cfg or PdConfig()
    if isinstance(S, SampleCov):
        S = S.S
    S = check_symmetric(S, "sample covariance")
    p = S.shape[0]
    project, mode = _projector(constraint, p)
    sigma = np.diag(np.diag(S)).astype(float) if sigma0 is None else check_symmetric(sigma0, "initial estimate").copy()
    if not is_spd(sigma):
        raise NotPositiveDefiniteError("initial estimate is not positive definite")
    nu = lambda_max(S)
    shifted = S - nu * np.eye(p)
    lam, V = np.linalg.eigh(sigma)

    trace, rho_trace, dist_trace = [], [], []
    stopped = False
    adaptive = cfg.adaptive
    level, steps_here, momentum = 0, 0, 0
    prev = sigma
    rho = cfg.rho(0)
    t = 0
    for t in range(cfg.max_iters):
        rho = cfg.rho(level)
        base, K = sigma, None
        if adaptive and cfg.accelerate and momentum > 0:
            y = symmetrize(sigma + (momentum - 1.0) / (momentum + 2.0) * (sigma - prev))
            try:
                np.linalg.cholesky(y)
            except np.linalg.LinAlgError:
                pass
            else:
                base, K = y, np.linalg.inv(y)
        if K is None:
            # the iterate is V diag(lam) V^T, so its inverse comes for free
            K = (V / lam) @ V.T
        A = symmetrize(K - K @ shifted @ K - rho * project(base))
        e, V = np.linalg.eigh(A)
        e, V = e[::-1], V[:, ::-1]
        lam = eigen_lambda_update(e, nu, rho)
        new = symmetrize((V * lam) @ V.T)
        change = relative_change(new, sigma)
        prev, sigma = sigma, new
        d = sigma - project(sigma)
        dist2 = float(np.sum(d * d))
        value = _factor_objective(V, lam, S) + 0.5 * rho * dist2
        rose = bool(trace) and rho == rho_trace[-1] and value > trace[-1]
        momentum = 0 if rose else momentum + 1
        trace.append(value)
        rho_trace.append(rho)
        dist_trace.append(float(np.sqrt(dist2)))
        if callback is not None:
            callback(t, sigma, rho)
        steps_here += 1
        if not adaptive:
            if change < cfg.epsilon:
                stopped = True
                break
            done = steps_here >= cfg.steps_per_level
        else:
            done = steps_here >= cfg.inner_max or (
                steps_here >= cfg.steps_per_level and rho * change < cfg.inner_tol
            )
            if done and np.sqrt(dist2) <= cfg.feas_tol * np.linalg.norm(sigma):
                stopped = True
                break
        if done:
            level += 1
            steps_here = 0
            momentum = 0
    iterations = t + 1

    final = project(sigma)
    gap = relative_change(final, sigma)
    info = dict(
        solver="pd", zeta=cfg.zeta, schedule="adaptive" if adaptive else "fixed-steps", rho_final=rho, levels=level + 1, rho_trace=rho_trace, dist_trace=dist_trace,
        penalized_objective=trace[-1], projection_gap=gap, stopped=stopped,
        rho_capped=cfg.rho_fixed is None and rho >= cfg.rho_max, **mode,
    )
    if not is_spd(final):
        info["failure"] = "projected iterate is not positive definite; try a smaller zeta"
        return CovEstimate(
            sigma=sigma, objective=neg_log_likelihood(sigma, S), iterations=iterations,
            converged=False, trace=trace, info=info,
        )
    objective = neg_log_likelihood(final, S)
    info["constrained_objective"] = objective
    converged = stopped and gap <= (cfg.feas_tol if adaptive else 10 * cfg.epsilon)
    return CovEstimate(sigma=final, objective=objective, iterations=iterations, converged=converged, trace=trace, info=info)
