import numpy as np
import pytest

from dp_audit.cipa import SamplePair


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def naive_counts(d, dp, k):
    """l and l* for the k-th smallest d, by direct counting."""
    dk = sorted(d)[k - 1]
    below = sum(1 for v in dp if v < dk)
    above = sum(1 for v in dp if v > dk)
    return below, len(dp) + 1 - above


@pytest.fixture
def random_pair(rng):
    def make(n, ties=False):
        if ties:
            d = rng.integers(0, 5, n).astype(float)
            dp = rng.integers(0, 5, n).astype(float)
        else:
            d = rng.normal(size=n)
            dp = rng.normal(rng.uniform(-2, 2), 1, size=n)
        return SamplePair(d, dp)

    return make


_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""

    def record(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
