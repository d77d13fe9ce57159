import pytest

from whittle_assoc.model import MbsParams, SystemConfig
from whittle_assoc.verify import random_small_configs


def tiny(buffer=10, **kw):
    """L=1, M=1, p=(.5, .5), r=.5, C=1."""
    return SystemConfig(L=1, M=1, arrival_pmf=(0.5, 0.5),
                        mbs=(MbsParams(0.5, 1.0),), buffer=buffer,
                        horizon=kw.pop("horizon", 10), warmup=kw.pop("warmup", 0), **kw)


@pytest.fixture
def tiny_cfg():
    return tiny()


@pytest.fixture(scope="session")
def small_configs():
    return random_small_configs()


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import LINES
    if LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(LINES):
            terminalreporter.write_line(LINES[n])
