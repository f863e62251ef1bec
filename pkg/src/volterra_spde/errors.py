"""Error taxonomy shared across the library.

Every exception raised on purpose derives from :class:`VolterraError`, so
callers (and the CLI) can separate deliberate failures from plain bugs.
The split mirrors how failures are reported: parameter/configuration
problems are caller mistakes, numeric problems mean a computation did not
reach its contracted tolerance.
"""


class VolterraError(Exception):
    """Base class for all library errors."""


class ParameterError(VolterraError):
    """A precondition on user-supplied parameters is violated.

    The message names the violated inequality, e.g. ``"H=1.2 outside (1/2, 1)"``.
    """


class ConfigurationError(VolterraError):
    """An assembled object failed its construction-time validation."""


class AdmissibilityError(ParameterError):
    """Exponent bookkeeping violates an admissibility hypothesis.

    Raised e.g. when a requested decay exponent gamma is >= alpha + 1/2, in
    which case no positive Holder order is predicted at all.
    """


class NumericError(VolterraError):
    """A numeric routine failed to meet its tolerance contract."""


class TruncationError(NumericError):
    """A doubling/convergence certificate exceeded its drift budget.

    Attributes
    ----------
    drift : float
        Relative change observed when the discretization was doubled.
    """

    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = float(drift)


class AlignmentError(VolterraError):
    """Breakpoints of an integrand do not sit on the path grid."""


class UndefinedRatioError(NumericError):
    """A moment ratio was requested for a (numerically) degenerate ensemble."""
