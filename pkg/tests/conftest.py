import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hiconn import Chart, SamplePlan

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=10, deadline=None, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture
def chart2():
    return Chart(2)


@pytest.fixture
def chart3():
    return Chart(3)


@pytest.fixture
def plan2(chart2):
    return SamplePlan.uniform(chart2, 20, seed=1)


@pytest.fixture
def plan3(chart3):
    return SamplePlan.uniform(chart3, 20, seed=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def fixture_path(name):
    return os.path.join(FIXTURES, name)


ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail):
    line = f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
