import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tethered_coverage.model import preset
from tethered_coverage.placement import build_deployment_plan

settings.register_profile("pkg", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def urban():
    return preset("urban")


@pytest.fixture(scope="session")
def suburban():
    return preset("suburban")


@pytest.fixture(scope="session")
def urban_plan(urban):
    return build_deployment_plan(*urban)


@pytest.fixture(scope="session")
def suburban_plan(suburban):
    return build_deployment_plan(*suburban)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""
    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
