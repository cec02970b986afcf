import numpy as np
import pytest

from lincvx.domains import catalog


@pytest.fixture(scope="session")
def ball():
    return catalog("BALL2")


@pytest.fixture(scope="session")
def egg():
    return catalog("EGG24")


@pytest.fixture(scope="session")
def egg3():
    return catalog("EGG226")


@pytest.fixture(scope="session")
def tube():
    return catalog("TUBE4")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
