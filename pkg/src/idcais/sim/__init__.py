"""Closed-loop simulation, scenario I/O and experiment runners."""
from .runner import Outcome, TrajectoryLog, attacker_policy_evasive, run_simulation
from .scenario import Scenario, ScenarioError, dumps, from_dict, load, loads, make_scenario, save, to_dict

__all__ = [
    "Outcome",
    "Scenario",
    "ScenarioError",
    "TrajectoryLog",
    "attacker_policy_evasive",
    "dumps",
    "from_dict",
    "load",
    "loads",
    "make_scenario",
    "run_simulation",
    "save",
    "to_dict",
]
