"""Scenario configuration, ground-truth simulation, and reporting."""

from .config import (
    METHOD_NAMES,
    MethodSpec,
    ScenarioConfig,
    bundled_scenario_names,
    bundled_scenario_text,
    config_from_document,
    load_bundled_scenario,
    load_config,
    load_config_file,
    method_spec,
)
from .run import (
    RunReport,
    RunSummary,
    StepRecord,
    advance_method,
    emit_report,
    run_scenario,
)
from .simulate import SimulationResult, simulate_truth, simulate_with_rng

__all__ = [
    "METHOD_NAMES",
    "MethodSpec",
    "RunReport",
    "RunSummary",
    "ScenarioConfig",
    "SimulationResult",
    "StepRecord",
    "advance_method",
    "bundled_scenario_names",
    "bundled_scenario_text",
    "config_from_document",
    "emit_report",
    "load_bundled_scenario",
    "load_config",
    "load_config_file",
    "method_spec",
    "run_scenario",
    "simulate_truth",
    "simulate_with_rng",
]
