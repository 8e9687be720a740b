"""Solitary waves of coupled cubic Gross-Pitaevskii systems with trapping potentials."""

from .errors import (
    ConfigError, DegenerateRegime, GPMassError, InfeasibleConstraint, NoConvergence,
)
from .grid import Grid
from .model import ConstraintSpec, ModelParams, PotentialSpec, ScatteringParams, classify
from .eigen import feasibility_threshold, principal_eigenpair
from .maximizer import MaximizeOptions, SolitarySolution, maximize, multi_start

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConstraintSpec", "DegenerateRegime", "GPMassError", "Grid",
    "InfeasibleConstraint", "MaximizeOptions", "ModelParams", "NoConvergence",
    "PotentialSpec", "ScatteringParams", "SolitarySolution", "classify",
    "feasibility_threshold", "maximize", "multi_start", "principal_eigenpair",
    "__version__",
]
