"""Contract-based hierarchical resilience management for a sorting line."""

from .config import CostModel, HarnessConfig, load_config
from .contracts import (Contract, LatencyFn, SpeedLevel, check_refinement, compose,
                        default_contracts, validate_hierarchy)
from .harness import compare, recovery_time, run_experiment, simulate
from .observers import Event, compile_observer, offline_check
from .plant import Plant, PlantConfig
from .scenarios import ScenarioEntry, ScenarioScript, canonical_script

__all__ = [
    "Contract", "CostModel", "Event", "HarnessConfig", "LatencyFn", "Plant", "PlantConfig",
    "ScenarioEntry", "ScenarioScript", "SpeedLevel", "canonical_script", "check_refinement",
    "compare", "compile_observer", "compose", "default_contracts", "load_config",
    "offline_check", "recovery_time", "run_experiment", "simulate", "validate_hierarchy",
]
