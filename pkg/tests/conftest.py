import math

import pytest

from mssl.core_model import ArrayConfig

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def array():
    return ArrayConfig(half_baseline_m=0.09, omega_rad_s=2 * math.pi / 60)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
