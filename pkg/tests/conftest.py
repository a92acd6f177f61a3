import pytest

from htlab.fiber import calibration_for
from htlab.group import preset


@pytest.fixture(scope="session")
def h1():
    return preset("heisenberg-1")


@pytest.fixture(scope="session")
def cal(h1):
    return calibration_for(h1)
