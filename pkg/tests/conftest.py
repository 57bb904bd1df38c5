import itertools

import numpy as np
import pytest

from dqaoa.qubo import QuboProblem


def naive_energy(full: np.ndarray, x) -> float:
    """Double loop over a full (not necessarily triangular) matrix."""
    total = 0.0
    n = len(x)
    for i in range(n):
        for j in range(n):
            total += full[i][j] * x[i] * x[j]
    return total


def all_bitstrings(n: int):
    for bits in itertools.product((0, 1), repeat=n):
        yield np.array(bits, dtype=np.int8)


def random_qubo(rng: np.random.Generator, n: int) -> QuboProblem:
    return QuboProblem(np.triu(rng.uniform(-1, 1, size=(n, n))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
