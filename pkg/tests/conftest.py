
import pytest

from adaptrhc.checks import probed_run
from adaptrhc.sim import builtin_scenarios

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = []


@pytest.fixture(scope="session")
def case1():
    return builtin_scenarios()["case1"]


@pytest.fixture(scope="session")
def case2():
    return builtin_scenarios()["case2"]


@pytest.fixture(scope="session")
def case1_probe(case1):
    """Case 1 run with per-solve diagnostics; a diverged run keeps its partial log."""
    return probed_run(case1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE:
        terminalreporter.write_line(line)
