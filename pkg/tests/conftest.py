import numpy as np
import pytest

from dim3.generator import fixed_truth, generate_fixed
from dim3.model import RelationTensor


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_data():
    """n=3, T=2 network with a few edges."""
    e = np.zeros((2, 3, 3), dtype=np.int8)
    e[0, 0, 1] = e[0, 1, 2] = e[1, 0, 1] = e[1, 2, 0] = 1
    return RelationTensor(e)


@pytest.fixture
def case1_small():
    return generate_fixed(fixed_truth(1, 8), 8, 3, 11)


def small_network(n, T, seed, density=0.3):
    r = np.random.default_rng(seed)
    return RelationTensor((r.random((T, n, n)) < density).astype(np.int8))


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> bool:
    """Queue one acceptance result line for the terminal summary."""
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
