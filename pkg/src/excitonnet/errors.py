"""Exception hierarchy shared across the package."""


class ExcitonNetError(Exception):
    """Base class for all package errors."""


class SeparationUnsatisfiable(ExcitonNetError):
    """Rejection sampling could not satisfy the minimum site separation."""


class DegenerateGeometry(ExcitonNetError):
    """Two sites are closer than the configured minimum separation."""


class BudgetExhausted(ExcitonNetError):
    """The time-domain integrator ran out of steps before absorption finished.

    The partial trajectory (with its moments so far) is kept on ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class EmptyState(ExcitonNetError):
    """The excited block carries no population."""


class BadSpec(ExcitonNetError):
    """Invalid grid specification."""


class EmptyColumn(ExcitonNetError):
    """A landscape column has no converged samples."""


class NoConvergedEvaluation(ExcitonNetError):
    """Every objective evaluation of the optimizer diverged."""
