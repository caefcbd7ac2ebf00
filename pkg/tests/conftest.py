import numpy as np
import pytest

from svdcoreset import low_rank_sparse

_ACCEPTANCE_LINES = []


def record_acceptance(name: str, ok: bool, detail: str):
    line = f"{name} {'PASS' if ok else 'FAIL'}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference_matrix():
    """Rank-5 signal plus 1% noise, 2000 x 100."""
    return low_rank_sparse(2000, 100, 5, noise=0.01, seed=1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
