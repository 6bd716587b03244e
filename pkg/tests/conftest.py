import pytest

from spiralsweep import Scenario

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def ref():
    """Reference scenario used throughout the worked examples."""
    return Scenario(100.0, 10.0, 1.0)


@pytest.fixture
def desk():
    """Small scenario the grid oracle can afford."""
    return Scenario(20.0, 4.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
