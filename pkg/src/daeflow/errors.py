"""Exception hierarchy.

The CLI maps :class:`ConfigError` to exit code 1 and every
:class:`NumericalError` to exit code 2.
"""


class DAEFlowError(Exception):
    """Base class for all package errors."""


class ConfigError(DAEFlowError, ValueError):
    """Invalid experiment configuration."""


class NumericalError(DAEFlowError):
    """A computation left the domain where it is defined."""


class CollapseError(NumericalError):
    """A continuous flow was queried at or past its covariance collapse time."""


class OutOfSupportError(NumericalError):
    """A density or kernel sum underflowed at the query point."""


class NonFiniteError(NumericalError):
    """A map produced NaN or infinite output."""


class QuadratureError(NumericalError):
    """A quadrature grid is too coarse or too small for the integrand."""


class InadmissibleError(NumericalError):
    """A ridgelet/activation pair has a vanishing or divergent admissibility constant."""


class TrainingDivergedError(NumericalError):
    """Gradient descent produced a non-finite loss."""
