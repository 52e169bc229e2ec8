import math

import pytest

from flatflow import corpus


@pytest.fixture(scope="session")
def surfaces():
    return {name: corpus.load(name) for name in corpus.NAMES}


@pytest.fixture(scope="session")
def torus(surfaces):
    return surfaces["torus"]


@pytest.fixture(scope="session")
def table(surfaces):
    return surfaces["square_table"]


@pytest.fixture(scope="session")
def pillowcase(surfaces):
    return surfaces["pillowcase"]


def close(a, b, tol=1e-12):
    return math.hypot(a[0] - b[0], a[1] - b[1]) <= tol


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
