"""Lumped thermal-network simulator for phase-change thermal energy storage."""

from .fg import FixedGridModel
from .mb import FsmMode, MovingBoundaryModel
from .plant import TesParameters
from .scenario import Scenario, load_scenario
from .solver import SolverConfig, integrate

__version__ = "0.1.0"

__all__ = [
    "FixedGridModel",
    "FsmMode",
    "MovingBoundaryModel",
    "Scenario",
    "SolverConfig",
    "TesParameters",
    "integrate",
    "load_scenario",
]
