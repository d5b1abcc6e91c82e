"""Exception hierarchy for the vortex moduli laboratory."""


class VortexModuliError(Exception):
    """Base class for all package errors."""


class GridMismatchError(VortexModuliError):
    """A grid function does not live on the expected grid."""


class PreconditionError(VortexModuliError):
    """An operation was called with inputs violating its contract."""


class SolvabilityError(VortexModuliError):
    """A Poisson right-hand side is not mean-zero to tolerance."""


class DegenerateDirectionError(VortexModuliError):
    """A tangent direction projects to zero in the horizontal subspace."""


class ConvergenceError(VortexModuliError):
    """An iterative solver failed to reach its tolerance.

    Carries the last residual so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)
        self.residual = residual


class ConfigError(VortexModuliError):
    """An experiment configuration is malformed; message names the field."""
