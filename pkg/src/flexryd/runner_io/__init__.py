"""Scenario files, ensemble execution, parameter scans and file output.

The scenario grammar, the output CSV schemas and the optional packed
binary format are documented in :mod:`flexryd.runner_io.scenario` and
:mod:`flexryd.runner_io.outputs`.
"""

from .scenario import Scenario, ScenarioError, parse_scenario
from .runner import run_ensemble, param_scan
from .outputs import write_outputs

__all__ = [
    "Scenario",
    "ScenarioError",
    "parse_scenario",
    "run_ensemble",
    "param_scan",
    "write_outputs",
]
