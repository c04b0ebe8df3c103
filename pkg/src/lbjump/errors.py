"""Exception types raised across the package.

Every error caused by bad inputs or violated preconditions derives from
:class:`LbjumpError` so callers can catch package failures in one clause.
"""


class LbjumpError(Exception):
    """Base class for all lbjump errors."""


class NonPositiveGridPoint(LbjumpError):
    """A balancing-function grid contained a point t <= 0."""


class MissingSupBound(LbjumpError):
    """An operation needed sup g but the spec has none, or only an empirical one."""


class OutOfSupport(LbjumpError):
    """A state lies outside the declared support of the target."""


class ZeroBaseProbability(LbjumpError):
    """The base kernel assigns zero mass to a requested transition.

    Raised instead of silently returning -inf for log t(x, y); callers that
    want the t := 0 convention map this to weight zero.
    """


class UncountableSupport(LbjumpError):
    """An exact enumeration was requested for a kernel with density support."""


class ZeroRate(LbjumpError):
    """The jump rate vanished at a state where the process must move."""


class TruncationNotConverged(LbjumpError):
    """A lattice tail sum did not reach the requested tolerance."""


class ExplosionGuard(LbjumpError):
    """A trajectory hit the event cap before the time horizon (strict mode)."""


class DimensionMismatch(LbjumpError):
    """Vector or sample dimensions do not agree."""


class EigenFailure(LbjumpError):
    """The dense symmetric eigensolver failed to converge."""


class CertificationFailure(LbjumpError):
    """A numerical certificate was requested in raising mode and did not hold."""


class PremiseViolated(LbjumpError):
    """A comparison premise (e.g. g1 >= omega*g2) failed on the realized grid."""


class PremiseUnverifiable(LbjumpError):
    """Tail constants (p < 1/2, lambda > 0) could not be exhibited numerically."""


class ModelValidation(LbjumpError):
    """A target/kernel pair violates its structural invariants."""


class SupportMismatch(LbjumpError):
    """Two measures or kernels disagree on where mass is allowed."""


class NonFiniteState(LbjumpError):
    """A numerical integrator produced NaN or infinity."""


class EmptyTrajectory(LbjumpError):
    """An estimator was handed a trajectory with no events."""


class ConfigInvalid(LbjumpError):
    """An experiment configuration failed schema validation."""
