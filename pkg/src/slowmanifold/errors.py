"""Exception types shared across the package."""


class SlowManifoldError(Exception):
    """Base class for all package errors."""


class InvalidMetric(SlowManifoldError):
    """Metric tensor evaluation failed (not symmetric positive definite)."""


class ZeroVector(SlowManifoldError):
    """A nonzero vector was required."""


class InvalidParameter(SlowManifoldError):
    """Model parameter outside its admissible range."""


class MechanismValidation(SlowManifoldError):
    """Reaction mechanism failed a structural check (atom balance, units, ...)."""


class IntegrationFailure(SlowManifoldError):
    """Base class for trajectory truncation events."""

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class BlowUp(IntegrationFailure):
    """State norm exceeded the blow-up bound."""


class DomainExit(IntegrationFailure):
    """Trajectory left the model's admissible domain."""


class StepCollapse(IntegrationFailure):
    """Adaptive step size collapsed below the minimum."""


class DomainTruncated(SlowManifoldError):
    """Requested time lies outside the trajectory's domain of definition."""


class ZeroField(SlowManifoldError):
    """The vector field vanishes where a nonzero field vector is required."""


class EmptyGrid(SlowManifoldError):
    """Every time-grid point was lost to trajectory truncation."""


class LevelSetNotFound(SlowManifoldError):
    """No sign change of the speed residual along any probed ray or chord."""


class Infeasible(SlowManifoldError):
    """No optimization start achieved the constraint tolerance."""


class ObjectiveFailure(SlowManifoldError):
    """Objective could not be evaluated at any admissible grid point."""


class SchemaMismatch(SlowManifoldError):
    """Input file does not match the expected schema."""


class ConfigError(SlowManifoldError):
    """Run configuration is invalid."""
