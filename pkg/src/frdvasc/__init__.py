"""Numerical laboratory for the fluid-reaction-diffusion vasculogenesis model."""

from .model import BoundaryConfig, ModelParams, PhiBC
from .fields import Grid, LinearSolveConfig
from .steady import SeriesSpec, SteadySolution, build_steady, constant_steady
from .dynamics import State, StepConfig, run, step
from .diagnostics import EnergyRecord, Reference, fit_decay, measure

__all__ = [
    "BoundaryConfig", "ModelParams", "PhiBC", "Grid", "LinearSolveConfig", "SeriesSpec",
    "SteadySolution", "build_steady", "constant_steady", "State", "StepConfig", "run", "step",
    "EnergyRecord", "Reference", "fit_decay", "measure",
]
__version__ = "0.1.0"
