class FirkPrecError(RuntimeError):
    """Base class for numerical failures raised by this package."""


class ConvergenceError(FirkPrecError):
    """An iteration (QR sweeps, Newton, optimizer) did not converge."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularMatrixError(FirkPrecError, ArithmeticError):
    """A pivot or diagonal entry fell below the singularity threshold."""


class ReorderError(FirkPrecError):
    """Adjacent Schur block exchange failed (ill-conditioned Sylvester solve)."""


class FactorizationError(FirkPrecError):
    """Sparse factorization broke down; ``row`` identifies the failing pivot."""

    def __init__(self, message, row=None, block=None):
        super().__init__(message)
        self.row = row
        self.block = block
