from .binary import BinaryMaxEnt, InconsistentTilesError, solve_scaling_factor
from .real import (
    CoverageError,
    DegenerateTargetError,
    RealMaxEnt,
    cell_params,
    dual_gradient,
    dual_objective,
)

__all__ = [
    "BinaryMaxEnt",
    "InconsistentTilesError",
    "solve_scaling_factor",
    "RealMaxEnt",
    "DegenerateTargetError",
    "CoverageError",
    "cell_params",
    "dual_gradient",
    "dual_objective",
]
