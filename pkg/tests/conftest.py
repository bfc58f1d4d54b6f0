import numpy as np
import pytest

from polyshift import build_circulant, build_random_geometric
from polyshift.experiments.circulant import circulant_problem


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def circ1000():
    """``L_sym(C(1000, {1, 2, 5}))`` with its analytic spectrum."""
    return circulant_problem(1000, [1, 2, 5])


@pytest.fixture(scope="session")
def small_rgg():
    return build_random_geometric(40, 0.35, seed=3)


@pytest.fixture(scope="session")
def cycle16():
    return build_circulant(16, [1])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
