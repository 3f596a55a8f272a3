import numpy as np
import pytest

from taskdesign.environments import SyntheticEnvironment, SyntheticSpec


@pytest.fixture(scope="session")
def env_u1():
    return SyntheticEnvironment(SyntheticSpec(uplift="u1"))


@pytest.fixture(scope="session")
def env_u2():
    return SyntheticEnvironment(SyntheticSpec(uplift="u2"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one status line per acceptance criterion, collected by test_acceptance
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
