import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from adaptlab.systems import crm_example, orm_example

settings.register_profile(
    "repro",
    derandomize=True,
    deadline=None,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repro")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def orm():
    return orm_example()


@pytest.fixture
def crm():
    return crm_example()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
