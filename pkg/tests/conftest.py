import numpy as np
import pytest

from cfisac.config import SystemConfig
from cfisac.oracles import default_instance


@pytest.fixture
def cfg():
    return SystemConfig()


@pytest.fixture
def instance():
    """(cfg, scenario, channels, solution) on the default layout."""
    return default_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
