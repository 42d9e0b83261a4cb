import numpy as np
import pytest

from bubblestrip.bubbles import Dimension, solve_synchronized
from bubblestrip.reduction import SystemConfig, build_system


@pytest.fixture(scope="session")
def dim5():
    return Dimension(5, 1)


@pytest.fixture(scope="session")
def sync5(dim5):
    return solve_synchronized(dim5)


@pytest.fixture(scope="session")
def default_system():
    return build_system(SystemConfig.default())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line, then assert."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
