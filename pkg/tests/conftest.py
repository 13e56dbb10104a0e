import numpy as np
import pytest

from flmsup.fnspace import Grid


@pytest.fixture
def grid():
    return Grid.uniform(100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def brownian_lambda(j):
    return 4.0 / ((2 * j - 1) * np.pi) ** 2


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
