import numpy as np
import pytest

from symmbem.geometry import make_l_shape, scale_for_capacity
from symmbem.problems import HarmonicProblem


@pytest.fixture(scope="session")
def l_shape():
    return make_l_shape()


@pytest.fixture(scope="session")
def scaled_l(l_shape):
    return scale_for_capacity(l_shape, 0.4)


@pytest.fixture(scope="session")
def corner_problem(scaled_l):
    return HarmonicProblem.corner(scaled_l)


def inside(poly, pt):
    """Even-odd ray casting, independent of the library."""
    x, y = pt
    v = poly.vertices
    c = False
    for (x1, y1), (x2, y2) in zip(v, np.roll(v, -1, axis=0)):
        if (y1 > y) != (y2 > y) and x < x1 + (y - y1) * (x2 - x1) / (y2 - y1):
            c = not c
    return c


ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    """Log one acceptance line (shown in the terminal summary) and assert it."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
