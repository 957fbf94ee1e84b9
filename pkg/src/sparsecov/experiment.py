"""Monte Carlo comparison of estimators on synthetic sparse covariance models."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bcd import BcdConfig, bcd_fit
from .core import sample_covariance
from .errors import InputError, SparseCovError
from .fdr import support
from .pd import PdConfig
from .selection import DEFAULT_GRID, select_alpha
from .synth import RNG_NAME, TruthSpec, confusion_counts, gen_sparse_spd, mcc, nrmse, sample_gaussian

ESTIMATORS = ("scm", "bcd", "bcd_oracle", "pd")

ROW_FIELDS = (
    "trial", "estimator", "nrmse", "mcc", "TP", "TN", "FP", "FN",
    "objective", "alpha", "m", "iterations", "converged", "error",
)


@dataclass
class ExperimentResult:
    rows: list[dict]
    summary: dict
    fields: tuple[str, ...] = ROW_FIELDS


@dataclass(frozen=True)
class _Job:
    spec: TruthSpec
    n: int
    trial: int
    estimators: tuple[str, ...]
    grid: tuple[float, ...]
    bcd_cfg: BcdConfig
    pd_cfg: PdConfig
    timings: bool


def trial_rng(seed: int | None, trial: int) -> np.random.Generator:
    base = 0 if seed is None else int(seed)
    return np.random.default_rng(base + trial)


def _fit_one(name, S, truth, job):
    if name == "scm":
        return S.S, {"objective": None, "alpha": None, "iterations": 0, "converged": True}
    if name == "bcd_oracle":
        est = bcd_fit(S, support(truth), job.bcd_cfg)
        return est.sigma, {"objective": est.objective, "alpha": None, "iterations": est.iterations,
                           "converged": est.converged}
    solver = "bcd" if name == "bcd" else "pd"
    cfg = job.bcd_cfg if solver == "bcd" else job.pd_cfg
    alpha, est, _ = select_alpha(S, grid=job.grid, solver=solver, cfg=cfg)
    return est.sigma, {"objective": est.objective, "alpha": alpha, "iterations": est.iterations,
                       "converged": est.converged}


def _run_trial(job: _Job) -> list[dict]:
    rng = trial_rng(job.spec.seed, job.trial)
    truth = gen_sparse_spd(replace(job.spec, seed=rng))
    S = sample_covariance(sample_gaussian(truth, job.n, rng))
    rows = []
    for name in job.estimators:
        row = {k: None for k in ROW_FIELDS}
        row.update(trial=job.trial, estimator=name)
        t0 = time.perf_counter()
        try:
            sigma_hat, meta = _fit_one(name, S, truth, job)
        except SparseCovError as exc:
            row["error"] = str(exc)
        else:
            counts = confusion_counts(truth, sigma_hat)
            row.update(meta)
            row.update(
                nrmse=nrmse(truth, sigma_hat), mcc=mcc(counts),
                TP=counts.TP, TN=counts.TN, FP=counts.FP, FN=counts.FN,
                m=int(counts.TP + counts.FP),
            )
        if job.timings:
            row["runtime_s"] = time.perf_counter() - t0
        rows.append(row)
    return rows


def _mean_stderr(values):
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return None, None
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def summarize(rows: list[dict], estimators) -> dict:
    out = {}
    for name in estimators:
        mine = [r for r in rows if r["estimator"] == name]
        ok = [r for r in mine if r["error"] is None]
        entry = {"trials": len(mine), "failures": len(mine) - len(ok)}
        for key in ("nrmse", "mcc"):
            mean, se = _mean_stderr([r[key] for r in ok])
            entry[f"{key}_mean"] = mean
            entry[f"{key}_stderr"] = se
        if ok and "runtime_s" in ok[0]:
            entry["runtime_mean_s"] = float(np.mean([r["runtime_s"] for r in ok]))
        out[name] = entry
    return out


def run_experiment(
    spec: TruthSpec,
    n: int,
    trials: int,
    estimators=("scm", "bcd"),
    grid=DEFAULT_GRID,
    bcd_cfg: BcdConfig | None = None,
    pd_cfg: PdConfig | None = None,
    jobs: int = 1,
    timings: bool = False,
) -> ExperimentResult:
    """Generate ``trials`` truths and data sets and score every estimator on each.

    Trial ``k`` draws all of its randomness from a generator seeded with
    ``spec.seed + k``, so results do not depend on ``jobs``. Estimator
    failures are recorded per row and left out of the summary means.
    """
    if trials < 1:
        raise InputError("trials must be >= 1")
    if n < 3:
        raise InputError("n must be >= 3")
    estimators = tuple(estimators)
    unknown = [e for e in estimators if e not in ESTIMATORS]
    if unknown or not estimators:
        raise InputError(f"unknown estimators {unknown}; choose from {ESTIMATORS}")
    job_list = [
        _Job(spec, n, k, estimators, tuple(grid), bcd_cfg or BcdConfig(), pd_cfg or PdConfig(), timings)
        for k in range(trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_run_trial, job_list))
    else:
        per_trial = [_run_trial(j) for j in job_list]
    rows = [r for chunk in per_trial for r in chunk]
    summary = {
        "config": {"p": spec.p, "n": n, "sparsity": spec.sparsity, "cond": spec.cond,
                   "seed": spec.seed, "trials": trials, "estimators": list(estimators)},
        "rng": RNG_NAME,
        "estimators": summarize(rows, estimators),
    }
    fields = ROW_FIELDS + (("runtime_s",) if timings else ())
    return ExperimentResult(rows=rows, summary=summary, fields=fields)
