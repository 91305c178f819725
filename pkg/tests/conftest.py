import pytest

from pll_lockin import LoopParameters

# damping regimes shared by several test modules
UNDERDAMPED = LoopParameters(0.0633, 0.0225, 250.0)
OVERDAMPED = LoopParameters(0.5, 2.0, 250.0)


@pytest.fixture
def underdamped():
    return UNDERDAMPED


@pytest.fixture
def overdamped():
    return OVERDAMPED


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
