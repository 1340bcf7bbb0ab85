"""Exception hierarchy.

Precondition failures (bad input, impossible request) derive from
:class:`PreconditionError`; budget exhaustion and failed certificates derive
from :class:`CertificationError`.  The CLI maps the two families to distinct
exit statuses.
"""


class AvoidanceError(Exception):
    """Base class for every error raised by this package."""


class PreconditionError(AvoidanceError, ValueError):
    pass


class CertificationError(AvoidanceError):
    pass


# complex
class DegenerateSimplex(PreconditionError):
    pass


class BadIndex(PreconditionError):
    pass


class EmptyRegion(PreconditionError):
    pass


class RegionsIntersect(PreconditionError):
    pass


class CarrierMismatch(PreconditionError):
    pass


# avoid_core
class DimensionMismatch(PreconditionError):
    pass


class SubdivisionBudgetExceeded(CertificationError):
    pass


class RetryBudgetExceeded(CertificationError):
    def __init__(self, message, simplices=()):
        super().__init__(message)
        self.simplices = tuple(simplices)


class OracleExhausted(CertificationError):
    pass


class CertificationFailed(CertificationError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


# charts
class PointOutsideImage(PreconditionError):
    pass


class CodimensionTooSmall(PreconditionError):
    pass


# glue
class CoverageGap(PreconditionError):
    pass


class ZeroClearance(PreconditionError):
    pass


class ConstraintViolated(PreconditionError):
    pass


# bundle
class CocycleViolation(PreconditionError):
    pass


class SubbundleViolation(PreconditionError):
    pass


# matrix
class NotUnitary(PreconditionError):
    pass
