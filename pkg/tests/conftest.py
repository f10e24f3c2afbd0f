import numpy as np
import pytest

from koopgram.edmd import KoopmanModel


def random_stable(rng, n, radius=0.9):
    """Random n x n matrix rescaled to the given spectral radius."""
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    return A * (radius * rng.uniform(0.3, 1.0) / rho)


def random_model(rng, n=None, m=None, p=None, radius=0.9):
    n = n or int(rng.integers(2, 7))
    m = m or int(rng.integers(1, 3))
    p = p or int(rng.integers(1, 3))
    return KoopmanModel.from_matrices(
        random_stable(rng, n, radius), rng.standard_normal((n, m)), rng.standard_normal((p, n))
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, in order, when the acceptance module ran."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        name, ok, detail = results[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{num:2d}] {name}: {detail}")
