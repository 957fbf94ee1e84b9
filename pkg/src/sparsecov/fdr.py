"""Covariance-graph sparsity pattern from correlation screening with FDR control.

Each off-diagonal pair (i, j) is one hypothesis ``Sigma_ij = 0``, tested
with the t-statistic of the sample Pearson correlation. The step-up cutoff
uses the harmonic-number correction, so FDR control holds under arbitrary
dependence between the statistics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.special

from .core import SampleCov, check_symmetric
from .errors import DegenerateVariableError, InputError

UNIT_RHO_TOL = 1e-12
# above this many hypotheses the equivalent sorted p-value form is used
PVALUE_FORM_THRESHOLD = 100_000


@dataclass(frozen=True)
class FdrConfig:
    alpha: float
    two_sided: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise InputError(f"alpha must lie in (0, 1), got {self.alpha}")


@dataclass
class TestField:
    """Per-pair statistics over the strict upper triangle, flattened row-major."""

    __test__ = False  # not a pytest class

    rho: np.ndarray
    p: int
    n: int | None = None
    t_stat: np.ndarray | None = None

    @property
    def M(self) -> int:
        return self.p * (self.p - 1) // 2

    @property
    def rows(self) -> np.ndarray:
        return np.triu_indices(self.p, 1)[0]

    @property
    def cols(self) -> np.ndarray:
        return np.triu_indices(self.p, 1)[1]

    def pair(self, m: int) -> tuple[int, int]:
        i, j = np.triu_indices(self.p, 1)
        return int(i[m]), int(j[m])

    def index(self, i: int, j: int) -> int:
        if i == j:
            raise InputError("diagonal entries are not hypotheses")
        i, j = min(i, j), max(i, j)
        return i * self.p - i * (i + 1) // 2 + (j - i - 1)


def _as_matrix(S) -> np.ndarray:
    if isinstance(S, SampleCov):
        return S.S
    return check_symmetric(S, "sample covariance")


def pearson_matrix(S) -> TestField:
    """Pearson correlations ``S_ij / sqrt(S_ii S_jj)`` for all pairs i < j."""
    n = S.n if isinstance(S, SampleCov) else None
    S = _as_matrix(S)
    d = np.diag(S)
    bad = np.nonzero(~(d > 0))[0]
    if bad.size:
        raise DegenerateVariableError(int(bad[0]))
    i, j = np.triu_indices(S.shape[0], 1)
    rho = S[i, j] / np.sqrt(d[i] * d[j])
    return TestField(rho=np.clip(rho, -1.0, 1.0), p=S.shape[0], n=n)


def t_statistics(field: TestField, n: int | None = None) -> TestField:
    """Attach ``T = rho * sqrt((n - 2) / (1 - rho^2))``; |rho| = 1 maps to +-inf."""
    n = field.n if n is None else n
    if n is None or n < 3:
        raise InputError(f"t-statistics need n >= 3, got n={n}")
    rho = field.rho
    unit = np.abs(rho) >= 1.0 - UNIT_RHO_TOL
    with np.errstate(divide="ignore", invalid="ignore"):
        t = rho * np.sqrt((n - 2) / (1.0 - rho**2))
    t[unit] = np.copysign(np.inf, rho[unit])
    return TestField(rho=rho, p=field.p, n=n, t_stat=t)


def screening_statistics(S, n: int | None = None) -> TestField:
    """Correlations and t-statistics in one call."""
    field = pearson_matrix(S)
    return t_statistics(field, n)


def student_t_upper_quantile(prob, dof):
    """Return ``q`` with ``P(T >= q) = prob`` for a Student-t with ``dof`` degrees of freedom.

    Works elementwise on arrays. Uses the lower-tail inverse at ``prob``
    and symmetry, so tiny tail probabilities keep full relative accuracy.
    """
    prob = np.asarray(prob, dtype=float)
    if np.any(~((prob > 0.0) & (prob < 1.0))):
        raise InputError("tail probability must lie in (0, 1)")
    if np.any(np.asarray(dof) < 1):
        raise InputError("degrees of freedom must be >= 1")
    q = -scipy.special.stdtrit(dof, prob)
    return float(q) if q.ndim == 0 else q


def harmonic_number(M: int) -> float:
    return float(np.sum(1.0 / np.arange(1, M + 1)))


def fdr_levels(alpha: float, M: int) -> np.ndarray:
    """Step-up significance levels ``alpha * m / (M * eta_M)`` for m = 1..M."""
    return alpha * np.arange(1, M + 1) / (M * harmonic_number(M))


def _rejection_count(stat_sorted, levels, dof, two_sided, use_pvalues):
    if use_pvalues:
        tail = scipy.special.stdtr(dof, -stat_sorted)
        pvals = 2.0 * tail if two_sided else tail
        hits = np.nonzero(pvals <= levels)[0]
    else:
        q = student_t_upper_quantile(levels / 2.0 if two_sided else levels, dof)
        hits = np.nonzero(stat_sorted >= q)[0]
    return int(hits[-1]) + 1 if hits.size else 0


def fdr_rejections(field: TestField, cfg: FdrConfig) -> np.ndarray:
    """Flat indices of the rejected hypotheses (pairs that keep an edge)."""
    if field.t_stat is None:
        field = t_statistics(field)
    M = field.M
    if M == 0:
        return np.zeros(0, dtype=int)
    stat = np.abs(field.t_stat) if cfg.two_sided else field.t_stat
    order = np.argsort(-stat, kind="stable")
    m_max = _rejection_count(
        stat[order], fdr_levels(cfg.alpha, M), field.n - 2, cfg.two_sided,
        use_pvalues=M > PVALUE_FORM_THRESHOLD,
    )
    return np.sort(order[:m_max])


def fdr_pattern(field: TestField, cfg: FdrConfig) -> np.ndarray:
    """Binary symmetric pattern with unit diagonal; 1 marks a detected edge."""
    rejected = fdr_rejections(field, cfg)
    Z = np.eye(field.p, dtype=np.int8)
    i, j = np.triu_indices(field.p, 1)
    Z[i[rejected], j[rejected]] = 1
    Z[j[rejected], i[rejected]] = 1
    return Z


# ---------------------------------------------------------------- patterns


def validate_pattern(Z, p: int | None = None) -> np.ndarray:
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] != Z.shape[1]:
        raise InputError(f"pattern must be square, got shape {Z.shape}")
    if p is not None and Z.shape[0] != p:
        raise InputError(f"pattern is {Z.shape[0]}x{Z.shape[0]}, expected {p}x{p}")
    if not np.all((Z == 0) | (Z == 1)):
        raise InputError("pattern entries must be 0 or 1")
    if not np.array_equal(Z, Z.T):
        raise InputError("pattern must be symmetric")
    if not np.all(np.diag(Z) == 1):
        raise InputError("pattern diagonal must be 1")
    return Z.astype(np.int8)


def support(sigma: np.ndarray) -> np.ndarray:
    """Indicator of non-zero entries, with the diagonal forced to 1."""
    Z = (np.asarray(sigma) != 0).astype(np.int8)
    np.fill_diagonal(Z, 1)
    return Z


def edge_count(Z: np.ndarray) -> int:
    """Number of non-zero strict upper-triangle entries."""
    i, j = np.triu_indices(Z.shape[0], 1)
    return int(np.count_nonzero(np.asarray(Z)[i, j]))


def pattern_edges(Z: np.ndarray) -> list[list[int]]:
    i, j = np.triu_indices(Z.shape[0], 1)
    keep = np.asarray(Z)[i, j] != 0
    return [[int(a), int(b)] for a, b in zip(i[keep], j[keep])]


def pattern_from_edges(p: int, edges) -> np.ndarray:
    Z = np.eye(p, dtype=np.int8)
    for a, b in edges:
        if a == b or not (0 <= a < p and 0 <= b < p):
            raise InputError(f"invalid edge ({a}, {b}) for p={p}")
        Z[a, b] = Z[b, a] = 1
    return Z


def pattern_to_json(Z: np.ndarray) -> str:
    return json.dumps({"p": int(Z.shape[0]), "edges": pattern_edges(Z)})


def pattern_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    return pattern_from_edges(int(doc["p"]), doc["edges"])


def pattern_to_dot(Z: np.ndarray, names=None, graph_name: str = "covariance") -> str:
    """Undirected DOT graph: one node per variable, one edge per non-zero pair."""
    p = Z.shape[0]
    names = [str(k) for k in range(p)] if names is None else [str(x) for x in names]
    lines = [f"graph {graph_name} {{"]
    for k in range(p):
        lines.append(f'  {k} [label={json.dumps(names[k])}];')
    for a, b in pattern_edges(Z):
        lines.append(f"  {a} -- {b};")
    lines.append("}")
    return "\n".join(lines) + "\n"
