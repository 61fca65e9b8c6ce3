"""Exception and warning types shared across the package."""


class Zk2dError(Exception):
    """Base class for all package-specific errors."""


class ContractViolationError(Zk2dError):
    """An argument violated a documented precondition (e.g. shape mismatch)."""


class IterationFailureError(Zk2dError):
    """Newton iteration did not converge within the allowed iterations."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


class InnerSolverError(Zk2dError):
    """The inner Krylov solver stagnated or failed."""


class ResolutionError(Zk2dError):
    """A field cannot be represented on the requested grid (spectral tail too large)."""


class DegenerateMaximumError(Zk2dError):
    """The tracked maximum is too flat for the frame-velocity formula."""


class TrackingLostError(Zk2dError):
    """The solution maximum drifted too far for an exact re-centering shift."""


class FitDomainError(Zk2dError):
    """Fit input violated a domain requirement (e.g. non-positive samples)."""


class NoBlowupError(Zk2dError):
    """The blow-up time search hit its upper bracket.

    The series is not consistent with a finite-time power law.
    """


class ConfigError(Zk2dError):
    """A run configuration file or value is invalid."""


class SeparationWarning(UserWarning):
    """Superposed profiles overlap more than the scenario claims."""
