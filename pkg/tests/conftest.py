import pytest

from agentlog.scenarios import builtin_scenario


@pytest.fixture(scope="session")
def example3_scenario():
    return builtin_scenario("example3")


@pytest.fixture(scope="session")
def example3_system(example3_scenario):
    return example3_scenario.build_system()


@pytest.fixture(scope="session")
def routing5_scenario():
    return builtin_scenario("routing5")


@pytest.fixture(scope="session")
def routing5_system(routing5_scenario):
    return routing5_scenario.build_system()
