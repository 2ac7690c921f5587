"""Error taxonomy shared across the toolkit."""


class ArgumentError(ValueError):
    """Bad argument: shape/grid mismatch, out-of-range parameter, overflow."""


class DomainError(ArgumentError):
    """Time outside a path's domain."""


class DivergenceError(RuntimeError):
    """Numerical state became non-finite during a march."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
