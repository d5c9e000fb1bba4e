import pytest

from luxlink.config import Scenario, ScenarioConfig
from luxlink.objective import BaselineCache, Evaluator


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    """Default scenario: 20 x 10 m room, two windows, 900 units."""
    return Scenario(ScenarioConfig())


@pytest.fixture(scope="session")
def baseline(scenario) -> BaselineCache:
    return BaselineCache.build(scenario)


@pytest.fixture(scope="session")
def evaluator(scenario, baseline) -> Evaluator:
    return Evaluator(scenario, baseline=baseline)
