import numpy as np
import pytest

from charf.genotype import MISSING, GenotypeMatrix


def random_matrix(rng, n_rows, n_cols, f=0.0):
    arr = rng.integers(0, 3, size=(n_rows, n_cols)).astype(np.int8)
    if f:
        arr[rng.random(arr.shape) < f] = MISSING
    return GenotypeMatrix(arr)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def record(label: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
