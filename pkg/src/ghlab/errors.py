"""Exception types shared across the package."""


class GhlabError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GhlabError):
    """A point or parameter lies outside the admissible domain."""


class SingularGaugeError(GhlabError):
    """Evaluation of a gauge potential at a coordinate singularity."""


class BandError(GhlabError):
    """Requested fiber mode outside the resolvable band."""


class OperatorStateError(GhlabError):
    """Operation applied to an operator in the wrong state (e.g. double
    boundary reduction)."""


class SingularOperatorError(GhlabError):
    """Direct solve hit a numerically singular matrix.

    Carries the estimated smallest singular value in ``sigma_min_estimate``.
    """

    def __init__(self, message, sigma_min_estimate=None):
        super().__init__(message)
        self.sigma_min_estimate = sigma_min_estimate


class ConfigError(GhlabError):
    """Configuration text failed to parse or validate."""
