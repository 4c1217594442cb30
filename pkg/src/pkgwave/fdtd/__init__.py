"""Finite-difference time-domain solver on a nonuniform staggered grid."""

from .grid import PMLSpec, YeeGrid, build_yee_grid, max_stable_timestep
from .solver import (FieldLineRecord, FieldState, InstabilityError, RunSettings,
                     SimulationRecord, field_energy, run_simulation, step)
from .sources import ProbeSpec, SourceSpec

__all__ = [
    "PMLSpec", "YeeGrid", "build_yee_grid", "max_stable_timestep", "FieldLineRecord",
    "FieldState", "InstabilityError", "RunSettings", "SimulationRecord", "field_energy",
    "run_simulation", "step", "ProbeSpec", "SourceSpec",
]
