"""Exception taxonomy shared across the toolkit.

Configuration and precondition violations raise early with a message naming
the offending quantity; numerical failures carry enough state (last residual,
coordinate, radius) for the caller to shrink a step and retry.
"""


class HoloevpError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(HoloevpError):
    """Invalid configuration value or malformed config file."""


class AssumptionViolation(HoloevpError):
    """Coefficient-field positivity or summability assumption failed.

    Carries the offending sample point (if any) in ``where``.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class AssemblyError(HoloevpError):
    """Non-finite coefficient values reached the assembler."""


class IterationError(HoloevpError):
    """Eigensolver or self-consistent loop failed to converge.

    ``residual`` holds the last relative residual seen.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ContinuationError(HoloevpError):
    """Near-singular pivot during a seeded solve: continuation step too large."""


class ContourError(HoloevpError):
    """Contour quadrature failed: continuation broke down or the loop did not
    close. The radius is too large; the caller should shrink it."""


class CertificateError(HoloevpError):
    """Certificate construction failed while sampling the analyticity region.

    ``coordinate`` and ``radius`` identify the offending stadium.
    """

    def __init__(self, message, coordinate=None, radius=None):
        super().__init__(message)
        self.coordinate = coordinate
        self.radius = radius


class EstimateError(HoloevpError):
    """A quadrature-point solve failed inside an estimator run."""
