import pytest

from ispsim.scenario import Scenario, design_controllers


@pytest.fixture(scope="session")
def default_scenario():
    return Scenario()


@pytest.fixture(scope="session")
def default_controllers(default_scenario):
    return design_controllers(default_scenario)
