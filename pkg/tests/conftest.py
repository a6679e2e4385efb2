import itertools
import math

import numpy as np
import pytest

from bsval.linalg import haar_random_unitary, permanent_naive
from bsval.model import Law, build_distribution
from bsval.seeds import derive_seed


def fock_probability(u, inputs, occupation):
    """Output probability for a general (collision-allowed) occupation tuple.

    Repeats rows and columns by their occupation and divides by the
    factorials, straight from the definition.
    """
    rows = list(inputs)
    cols = [mode for mode, count in enumerate(occupation) for _ in range(count)]
    sub = u[np.ix_(rows, cols)]
    norm = math.prod(math.factorial(c) for c in occupation)
    return abs(permanent_naive(sub)) ** 2 / norm


def all_occupations(m, n):
    for combo in itertools.combinations_with_replacement(range(m), n):
        occ = [0] * m
        for mode in combo:
            occ[mode] += 1
        yield tuple(occ)


@pytest.fixture(scope="session")
def u16():
    return haar_random_unitary(16, derive_seed(0, "matrix"))


@pytest.fixture(scope="session")
def ideal16(u16):
    return build_distribution(u16, Law.ideal(), n=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"AC{criterion:<3d}{'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s[2:5])):
            terminalreporter.write_line(line)
