import numpy as np
import pytest

from mhngarch import fixtures
from mhngarch.filtering import Block

_CRITERIA: dict[int, list[bool]] = {}
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, title = mark.args
    _TITLES[n] = title
    _CRITERIA.setdefault(n, []).append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status = "PASS" if all(_CRITERIA[n]) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}  {_TITLES[n]}")


@pytest.fixture(scope="session")
def dji_block() -> Block:
    return fixtures.block("DJI")


@pytest.fixture(scope="session")
def aapl_pair():
    return fixtures.pair_params("AAPL", r=0.0002)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
