"""Derivative-free funnel control for relative-degree-two nonlinear systems."""

from .controllers import (
    ComparisonControllerParams,
    FeasibilityReport,
    FilterControllerParams,
    check_feasibility,
    comparison_control_output,
    comparison_state_deriv,
    filter_control_output,
    filter_state_deriv,
)
from .errors import BarrierError, ScenarioError, StateError
from .harness.scenario import Scenario, load_scenario
from .harness.simulate import RunResult, compare, run_scenario, sweep

__all__ = [
    "BarrierError",
    "ComparisonControllerParams",
    "FeasibilityReport",
    "FilterControllerParams",
    "RunResult",
    "Scenario",
    "ScenarioError",
    "StateError",
    "check_feasibility",
    "compare",
    "comparison_control_output",
    "comparison_state_deriv",
    "filter_control_output",
    "filter_state_deriv",
    "load_scenario",
    "run_scenario",
    "sweep",
]
