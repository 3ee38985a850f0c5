import numpy as np
import pytest

from bandjost.model import BandedOperator


def random_operator(p: int, n_rows: int, scale: float, seed: int) -> BandedOperator:
    """Zero-tail operator with complex Gaussian deviations of size ``scale``."""
    rng = np.random.default_rng(seed)
    band = scale * (rng.normal(size=(n_rows, 2 * p + 1)) + 1j * rng.normal(size=(n_rows, 2 * p + 1)))
    band[:, 0] += 1.0
    band[:, -1] += 1.0
    return BandedOperator(p, band)


def single_site(v, p=1):
    return BandedOperator.from_entries(p, {0: {1: v}})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    def record(k: int, ok: bool, detail: str) -> None:
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
