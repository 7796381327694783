import numpy as np
import pytest

from eqboot.core import RngStream


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(987)


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(label: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
