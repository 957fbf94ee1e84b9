"""EBIC-driven choice of the FDR level.

FDR patterns are nested in alpha, so a grid of levels collapses to a short
path of distinct patterns; one MLE is fitted per distinct pattern and the
level with the lowest EBIC wins.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .bcd import BcdConfig, bcd_fit
from .core import CovEstimate, SampleCov, log_likelihood
from .errors import InternalStateError, SparseCovError
from .fdr import FdrConfig, edge_count, fdr_pattern, screening_statistics
from .pd import PdConfig, pd_fit

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(float(x) for x in np.round(np.arange(1, 21) * 0.005, 6))


@dataclass
class PathEntry:
    alpha: float
    Z: np.ndarray
    m: int


@dataclass
class AlphaPath:
    alphas: list[float]
    distinct: list[PathEntry]


@dataclass
class EbicEntry:
    alpha: float
    m: int
    pattern_edges: int
    log_likelihood: float | None
    ebic: float | None
    objective: float | None = None
    iterations: int | None = None
    converged: bool | None = None
    error: str | None = None


@dataclass
class EbicReport:
    entries: list[EbicEntry]
    selected: int
    solver: str
    count_from: str = "estimate"
    warnings: list[str] = field(default_factory=list)

    @property
    def best(self) -> EbicEntry:
        return self.entries[self.selected]

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "count_from": self.count_from,
            "alphas": [e.alpha for e in self.entries],
            "m": [e.m for e in self.entries],
            "ebic": [e.ebic for e in self.entries],
            "selected": self.selected,
            "selected_alpha": self.best.alpha,
            "entries": [asdict(e) for e in self.entries],
            "warnings": list(self.warnings),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def ebic_penalty(m: int, n: int, p: int) -> float:
    M = p * (p - 1) // 2
    return m * np.log(p * n) + 2.0 * m * np.log(M + p)


def ebic_score(sigma_hat, S, n: int, p: int | None = None, m: int | None = None) -> float:
    """``-2 L(sigma_hat) + m log(pn) + 2 m log(M + p)``.

    ``m`` defaults to the number of non-zero strict upper-triangle entries
    of ``sigma_hat``.
    """
    if isinstance(sigma_hat, CovEstimate):
        sigma_hat = sigma_hat.sigma
    if isinstance(S, SampleCov):
        S = S.S
    p = S.shape[0] if p is None else p
    if m is None:
        m = edge_count(sigma_hat)
    return float(-2.0 * log_likelihood(sigma_hat, S, n, p) + ebic_penalty(m, n, p))


def alpha_path(S, n: int | None = None, grid=DEFAULT_GRID, two_sided: bool = True) -> AlphaPath:
    """Distinct FDR patterns along an ascending grid, keeping the first level of each."""
    if n is None:
        n = S.n
    alphas = [float(a) for a in grid]
    if not alphas:
        raise SparseCovError("empty alpha grid")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise SparseCovError("alpha grid must be strictly ascending")
    field_ = screening_statistics(S, n)
    distinct: list[PathEntry] = []
    prev = None
    for a in alphas:
        Z = fdr_pattern(field_, FdrConfig(alpha=a, two_sided=two_sided))
        if prev is not None:
            if np.any((prev != 0) & (Z == 0)):
                raise InternalStateError(f"FDR patterns not nested at alpha={a}")
            if np.array_equal(prev, Z):
                continue
        distinct.append(PathEntry(alpha=a, Z=Z, m=edge_count(Z)))
        prev = Z
    return AlphaPath(alphas=alphas, distinct=distinct)


def _fit(S, Z, solver, cfg, sigma0):
    if solver == "bcd":
        return bcd_fit(S, Z, cfg if isinstance(cfg, BcdConfig) else None, sigma0=sigma0)
    if solver == "pd":
        return pd_fit(S, Z, cfg if isinstance(cfg, PdConfig) else None, sigma0=sigma0)
    raise SparseCovError(f"unknown solver {solver!r}")


def select_alpha(
    S,
    n: int | None = None,
    grid=DEFAULT_GRID,
    solver: str = "bcd",
    cfg=None,
    count_from: str = "estimate",
    two_sided: bool = True,
    warm_start: bool = False,
    path: AlphaPath | None = None,
) -> tuple[float, CovEstimate, EbicReport]:
    """Fit every distinct pattern on the path and return the minimum-EBIC one.

    Ties go to the smallest alpha. A fit that raises, or a PD fit whose
    projected iterate is not SPD, is dropped with a warning.

    With ``warm_start`` each fit starts from the previous (sparser, hence
    feasible) estimate.
    """
    if isinstance(S, SampleCov):
        n = S.n if n is None else n
        S = S.S
    if count_from not in ("estimate", "pattern"):
        raise SparseCovError(f"count_from must be 'estimate' or 'pattern', got {count_from!r}")
    p = S.shape[0]
    if path is None:
        path = alpha_path(S, n, grid, two_sided)

    entries: list[EbicEntry] = []
    fits: list[CovEstimate | None] = []
    warnings: list[str] = []
    prev_sigma = None
    for item in path.distinct:
        try:
            est = _fit(S, item.Z, solver, cfg, prev_sigma if warm_start else None)
            if "failure" in est.info:
                raise SparseCovError(est.info["failure"])
        except SparseCovError as exc:
            msg = f"alpha={item.alpha}: fit failed ({exc})"
            logger.warning(msg)
            warnings.append(msg)
            entries.append(EbicEntry(alpha=item.alpha, m=item.m, pattern_edges=item.m,
                                     log_likelihood=None, ebic=None, error=str(exc)))
            fits.append(None)
            continue
        est.alpha = item.alpha
        prev_sigma = est.sigma
        m = edge_count(est.sigma) if count_from == "estimate" else item.m
        ll = log_likelihood(est.sigma, S, n, p)
        entries.append(EbicEntry(
            alpha=item.alpha, m=m, pattern_edges=item.m, log_likelihood=ll,
            ebic=float(-2.0 * ll + ebic_penalty(m, n, p)),
            objective=est.objective, iterations=est.iterations, converged=est.converged,
        ))
        fits.append(est)

    scored = [k for k, e in enumerate(entries) if e.ebic is not None]
    if not scored:
        raise SparseCovError("every fit on the alpha path failed")
    best = min(scored, key=lambda k: (entries[k].ebic, entries[k].alpha))
    report = EbicReport(entries=entries, selected=best, solver=solver, count_from=count_from, warnings=warnings)
    return entries[best].alpha, fits[best], report
