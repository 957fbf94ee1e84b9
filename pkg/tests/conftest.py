import numpy as np
import pytest

from sparsecov.core import sample_covariance
from sparsecov.synth import TruthSpec, gen_sparse_spd, sample_gaussian


def random_spd(p, rng, jitter=0.5):
    B = rng.standard_normal((p, p))
    return B @ B.T / p + jitter * np.eye(p)


def random_pattern(p, rng, density=0.4):
    U = np.triu(rng.random((p, p)) < density, 1)
    Z = (U | U.T).astype(np.int8)
    np.fill_diagonal(Z, 1)
    return Z


def sparse_instance(p, n, sparsity, seed, cond=100.0):
    """Truth, sample covariance and true support for one synthetic draw."""
    rng = np.random.default_rng(seed)
    truth = gen_sparse_spd(TruthSpec(p=p, sparsity=sparsity, cond=cond, seed=rng))
    S = sample_covariance(sample_gaussian(truth, n, rng))
    Z = (truth != 0).astype(np.int8)
    np.fill_diagonal(Z, 1)
    return truth, S, Z


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _verdict(number, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return _verdict


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
