import numpy as np
import pytest

from framesurf.refelem import build_reference_element
from framesurf.solvers.common import cached_mesh


@pytest.fixture(scope="session")
def sphere():
    """Canonical mesh: icosahedral refinement 2, cubic geometry, 320 elements."""
    return cached_mesh("sphere", 2, 3, 1.0)


@pytest.fixture(scope="session")
def coarse_sphere():
    return cached_mesh("sphere", 1, 3, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def elem5():
    return build_reference_element(5)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion; returns the verdict."""
    def _report(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
