"""
Exception hierarchy. Every error carries the process exit code the CLI reports.
"""

from typing import Iterable, Optional


class TerraceLabError(Exception):
    """Base class for all terrace_lab errors."""

    exit_code = 1


class ConfigError(TerraceLabError, ValueError):
    """Invalid configuration or invalid call arguments."""

    exit_code = 2


class NumericalDiagnosticError(TerraceLabError):
    """A computed quantity contradicts a structural property of the equation."""

    exit_code = 3


class MarginalStateError(NumericalDiagnosticError):
    """A steady state has a principal eigenvalue inside the marginal dead-band."""


class BracketViolationError(NumericalDiagnosticError):
    """A merged front speed falls outside the speeds of the fronts it replaced."""


class SignViolationError(NumericalDiagnosticError):
    """Front speeds around an unstable state have the wrong signs."""


class MultipleSpeedsError(NumericalDiagnosticError):
    """Level sets between two states travel at distinct speeds."""

    def __init__(self, message: str, speeds: Optional[Iterable[float]] = None):
        super().__init__(message)
        self.speeds = list(speeds or [])

    def __reduce__(self):
        return (self.__class__, (str(self), self.speeds))


class SpeedFitError(NumericalDiagnosticError):
    """Front position regression does not meet the quality thresholds."""


class TerraceConstructionError(NumericalDiagnosticError):
    """The merging procedure could not produce nondecreasing speeds."""


class TerraceMismatchError(NumericalDiagnosticError):
    """Two terraces in the same direction disagree."""


class CertificateError(NumericalDiagnosticError):
    """A sub/supersolution residual certificate failed."""


class GeometryError(NumericalDiagnosticError):
    """Degenerate or inconsistent polygon computation."""


class LatticeError(NumericalDiagnosticError):
    """The stable-state lattice violates its structural requirements."""


class UnknownPlateauError(NumericalDiagnosticError):
    """An expanding plateau matches no known stable state."""


class ResourceError(TerraceLabError):
    """The run exhausted its domain, horizon or iteration budget."""

    exit_code = 4


class ConvergenceError(ResourceError):
    """Newton or power iteration did not converge."""


class BoundaryContaminationError(ResourceError):
    """The solution changed near a clamped boundary."""


class InvariantRegionError(ResourceError):
    """The solution left its invariant region or became non-finite."""


class NoInvasionError(ResourceError):
    """A compactly supported datum failed to invade."""


class PlateauDetectionError(ResourceError):
    """No plateau was resolved before the horizon."""
