"""Scenarios, configuration files, artifact writers and the command line."""

from .config import ConfigError, config_hash, dump_config, load_config, parse_config
from .run import RunResult, convergence_study, resolve_scenario, run_convergence, run_scenario
from .scenario import (
    BoundarySpec,
    ConvergenceSpec,
    MaterialSpec,
    MeshSpec,
    Scenario,
    ScenarioError,
    build_problem,
    build_scenario_mesh,
    builtin,
    builtin_scenarios,
    validate,
)
from .vtk import read_vtk_cells, write_vtk_snapshot

__all__ = [
    "BoundarySpec", "ConfigError", "ConvergenceSpec", "MaterialSpec", "MeshSpec", "RunResult",
    "Scenario", "ScenarioError", "build_problem", "build_scenario_mesh", "builtin",
    "builtin_scenarios", "config_hash", "convergence_study", "dump_config", "load_config",
    "parse_config", "read_vtk_cells", "resolve_scenario", "run_convergence", "run_scenario",
    "validate", "write_vtk_snapshot",
]
