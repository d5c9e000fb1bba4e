"""luxlink: joint wireless / daylight window placement simulation and optimization."""

from .config import Scenario, ScenarioConfig, load_scenario_config, save_scenario_config
from .objective import BaselineCache, Evaluator, PerformanceReport, evaluate
from .scene import (BaseStation, BlockageField, MeasurementGrid, RoomSpec,
                    WeightMatrix, WindowLayout, build_grid, sample_blockages,
                    udw_layout, user_weights, validate_layout)

__version__ = "0.1.0"

__all__ = [
    "BaseStation", "BaselineCache", "BlockageField", "Evaluator",
    "MeasurementGrid", "PerformanceReport", "RoomSpec", "Scenario",
    "ScenarioConfig", "WeightMatrix", "WindowLayout", "build_grid",
    "evaluate", "load_scenario_config", "sample_blockages",
    "save_scenario_config", "udw_layout", "user_weights", "validate_layout",
    "__version__",
]
