import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cylflow.chart import build_cylinder

settings.register_profile("cylflow", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("cylflow")


@pytest.fixture(scope="session")
def ref_grid():
    """Reference resolution of the acceptance criteria."""
    return build_cylinder(1, 2, 4, 64, 6.0, 97)


@pytest.fixture(scope="session")
def grid():
    """Working grid for most tests (n=2, k=1, N=4)."""
    return build_cylinder(1, 2, 4, 32, 6.0, 97)


@pytest.fixture(scope="session")
def small_grid():
    return build_cylinder(1, 2, 4, 16, 6.0, 49)


@pytest.fixture(scope="session")
def hyper_grid():
    return build_cylinder(1, 2, 3, 32, 6.0, 97)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "SUMMARY", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for key in sorted(lines):
            terminalreporter.write_line(lines[key])
