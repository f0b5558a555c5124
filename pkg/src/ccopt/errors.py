"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Bad user input: malformed config, out-of-range parameter, shape mismatch."""


class DimensionMismatchError(ValidationError):
    """Vector argument does not match the expected dimension."""


class OracleUnavailableError(RuntimeError):
    """A closed-form quantity was requested for a problem that does not define it."""


class DivergenceError(RuntimeError):
    """Iteration produced non-finite values or left the trust region.

    Carries the last valid state and, when raised from a full run, the
    trajectory recorded up to the failure.
    """

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory
