import pytest

from gp_mass.maximizer import maximize
from gp_mass.model import ConstraintSpec, ModelParams


@pytest.fixture(scope="session")
def defoc():
    return ModelParams.harmonic(n=1024, mu1=-1.0, mu2=-1.0, beta=0.5)


@pytest.fixture(scope="session")
def defoc_coarse():
    return ModelParams.harmonic(n=256, mu1=-1.0, mu2=-1.0, beta=0.5)


@pytest.fixture(scope="session")
def focusing():
    return ModelParams.harmonic(n=1024, mu1=1.0, mu2=1.0, beta=0.2)


@pytest.fixture(scope="session")
def defoc_solution(defoc):
    return maximize(defoc, ConstraintSpec(2.5, 1.0, 1.0))


@pytest.fixture(scope="session")
def coarse_solution(defoc_coarse):
    return maximize(defoc_coarse, ConstraintSpec(2.5, 1.0, 1.0))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import _rows
    except ImportError:
        return
    if _rows:
        terminalreporter.section("acceptance criteria")
        for line in _rows:
            terminalreporter.write_line(line)
