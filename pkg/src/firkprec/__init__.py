"""Block preconditioners for fully implicit Runge-Kutta stage systems."""
from ._jit import USE_NUMBA, backend_name
from .exceptions import (ConvergenceError, FactorizationError, FirkPrecError, ReorderError,
                         SingularMatrixError)
from .factory import VARIANTS, PrecondPlan, build_plan
from .harness import ExperimentConfig, run
from .krylov import GmresConfig, SolveStats, gmres_right
from .precondops import BlockPreconditioner, accuracy_diagnostic, apply, assemble
from .tableau import ButcherTableau, gauss_legendre, verify_order_conditions

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA", "backend_name", "ConvergenceError", "FactorizationError", "FirkPrecError",
    "ReorderError", "SingularMatrixError", "VARIANTS", "PrecondPlan", "build_plan",
    "ExperimentConfig", "run", "GmresConfig", "SolveStats", "gmres_right", "BlockPreconditioner",
    "accuracy_diagnostic", "apply", "assemble", "ButcherTableau", "gauss_legendre",
    "verify_order_conditions",
]
