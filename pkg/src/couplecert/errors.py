"""Exception types shared across the package."""


class CouplecertError(Exception):
    """Base class for all package-specific errors."""


class AssumptionViolation(CouplecertError, ValueError):
    """Envelope data fails a structural precondition."""


class NotContractive(CouplecertError, ValueError):
    """A certificate would carry a rate outside (0, 1)."""


class StepSizeError(CouplecertError, ValueError):
    """A step size or truncation radius violates a stated inequality."""


class DensityUnavailable(CouplecertError, ValueError):
    """The noise family has no computable density for this request."""


class MomentUnavailable(CouplecertError, ValueError):
    """A required absolute moment of the noise is infinite."""


class QuadratureError(CouplecertError, ArithmeticError):
    """Adaptive integration exceeded its refinement budget."""


class EstimatorVarianceError(CouplecertError, RuntimeError):
    """A Monte Carlo estimate is too noisy to certify."""


class InstanceTooLarge(CouplecertError, ValueError):
    """An exact-enumeration instance exceeds the term budget."""


class ConfigError(CouplecertError, ValueError):
    """Malformed or unknown configuration input."""
