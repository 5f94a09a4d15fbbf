"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input record violates a data invariant.

    ``record`` carries the id of the offending location, arc or trip.
    """

    def __init__(self, message, record=None):
        self.record = record
        if record is not None:
            message = f"{record}: {message}"
        super().__init__(message)


class ConfigurationError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """Internal pieces of a solution disagree with each other."""


class SolverLimitReached(RuntimeError):
    """A node, iteration or time budget ran out before optimality was proven.

    The partially explored state is attached so the caller can resume.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
