import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cauchy_mann.experiments import annulus_problem, rectangle_problem

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("default")

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def rect_small():
    return rectangle_problem(17, 13)


@pytest.fixture(scope="session")
def rect_medium():
    return rectangle_problem(33, 25)


@pytest.fixture(scope="session")
def annulus_small():
    return annulus_problem(17, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<4} {'PASS' if ok else 'FAIL'}  {detail}")
