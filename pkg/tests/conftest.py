import pytest

from hestonis.model import EQUITY_PARAMS, TimeGrid


@pytest.fixture(scope="session")
def params():
    return EQUITY_PARAMS


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(252, 1.0)


@pytest.fixture(scope="session")
def coarse_grid():
    return TimeGrid(64, 1.0)
