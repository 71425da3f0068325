"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class PPWaveError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(PPWaveError, ValueError):
    """Invalid user input (unknown names, malformed config fields).

    ``field`` carries the dotted path of the offending config entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalError(PPWaveError, ArithmeticError):
    """A numerical routine failed (quadrature, integration, Newton)."""


class QuadratureError(NumericalError):
    def __init__(self, message: str, eps: float):
        self.eps = eps
        super().__init__(f"{message} (eps={eps!r})")


class BlowUpError(NumericalError):
    def __init__(self, u: float, message: str = "non-finite state during integration"):
        self.u = u
        super().__init__(f"{message} at u={u!r}")


class NonConvergenceError(NumericalError):
    """Newton iteration gave up; ``last_iterate`` holds the final iterate(s)."""

    def __init__(self, message: str, last_iterate=None, failed=None):
        self.last_iterate = last_iterate
        self.failed = failed
        super().__init__(message)


class DomainError(PPWaveError, ValueError):
    """An input lies outside the region where a result is guaranteed."""


class PreconditionError(PPWaveError, ValueError):
    pass


class InsufficientDataError(PPWaveError, ValueError):
    pass


class InversionFailure(PPWaveError):
    """Constructive failure while building inversion data.

    ``inclusion`` names the set inclusion that could not be established.
    """

    def __init__(self, message: str, inclusion: str):
        self.inclusion = inclusion
        super().__init__(f"{inclusion}: {message}")
