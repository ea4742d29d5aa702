import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from oracles import jittered_square, pinwheel, two_triangle_square  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square():
    return two_triangle_square()


@pytest.fixture
def wheel():
    return pinwheel()


@pytest.fixture
def jittered():
    return jittered_square(6, seed=3)


_criteria = []


def pytest_runtest_logreport(report):
    if report.when == "call":
        _criteria.extend(line for line in report.capstdout.splitlines()
                         if line.startswith("CRITERION "))


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_criteria):
            terminalreporter.write_line(line)
