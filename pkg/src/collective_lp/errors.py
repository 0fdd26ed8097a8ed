"""Exception types raised by the library."""


class CollectiveError(Exception):
    """Base class for all library errors."""


class OriginSingularity(CollectiveError, ValueError):
    """A sphere-restricted Hamiltonian was evaluated too close to the origin."""


class VortexCollision(CollectiveError, ValueError):
    """Two point vortices came closer than the collision threshold."""


class NonConvergence(CollectiveError, RuntimeError):
    """The implicit stage equations could not be solved.

    ``residual`` holds the last stage increment; ``step`` is filled in by the
    trajectory drivers with the index of the failing step.
    """

    def __init__(self, message, residual=float("nan"), step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            msg = f"{msg} (at step {self.step})"
        return msg
