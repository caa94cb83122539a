"""Exception types raised by smoothmatch.

All library-specific failures derive from :class:`SmoothMatchError` so callers
can catch the whole family.  ``ParameterError`` additionally derives from
``ValueError`` to play well with generic validation code.
"""


class SmoothMatchError(Exception):
    """Base class for all smoothmatch errors."""


class ParameterError(SmoothMatchError, ValueError):
    """Invalid argument values or malformed configuration/input files."""


class IntegrationDivergedError(SmoothMatchError):
    """Numerical integration produced a non-finite state.

    Attributes
    ----------
    t : float
        Time at which the first non-finite state was detected.
    """

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"integration diverged at t={t:g}")


class IdentifiabilityError(SmoothMatchError):
    """Normal equations are numerically singular.

    The weighted Gram matrix of right-hand-side parameter gradients is the
    finite-sample analogue of the identifiability matrix J_theta; a condition
    number beyond the threshold means the parameters are not locally
    identifiable from the supplied trajectory and weight.
    """


class EstimationFailedError(SmoothMatchError):
    """No optimizer start produced a finite criterion value."""
