import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pocmediate import LinearScmSpec, PnsQuery  # noqa: E402


@pytest.fixture
def unit_model():
    return LinearScmSpec()


@pytest.fixture
def q01():
    return PnsQuery(x=[1.0], x_prime=[0.0], y=0.0, c=[0.0])


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
