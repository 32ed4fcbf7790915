"""Exception types shared across the package."""


class QJumpError(Exception):
    pass


class PreconditionError(QJumpError, ValueError):
    """An input violates a documented precondition (grid too small, bad step, ...)."""


class HermiticityError(QJumpError, ValueError):
    pass


class InvalidParameterError(QJumpError, ValueError):
    pass


class ConfigError(QJumpError, ValueError):
    """Bad run configuration. ``key`` names the offending entry when there is one."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
        self.reason = message


class NumericalBreakdown(QJumpError, RuntimeError):
    """A trajectory left the physical state space beyond tolerance.

    ``diagnostics`` carries whatever the integrator knew at the time
    (time, positivity floor, trace, event count).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class EnsembleAborted(QJumpError, RuntimeError):
    pass


class BoundaryWarning(UserWarning):
    """State mass is reaching the edge of the periodic box."""
