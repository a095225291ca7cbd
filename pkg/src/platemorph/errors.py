"""Exception hierarchy shared across the package."""


class PlateMorphError(Exception):
    """Base class for all errors raised by platemorph."""


class ValidationError(PlateMorphError):
    """Input data violates a documented invariant."""


class MaterialRangeError(PlateMorphError):
    """Requested activation temperature is outside the calibrated range."""


class BelowTgError(MaterialRangeError):
    """Activation temperature at or below the glass transition: no recovery."""


class OutOfRangeError(MaterialRangeError):
    """Activation temperature outside the measured recovery table."""


class SingularSystemError(PlateMorphError):
    """The laminate block system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SingularMapError(PlateMorphError):
    """Degenerate deployment map; flat dimensions cannot be recovered."""


class GeometryError(PlateMorphError):
    """Inconsistent surface/patch geometry (corner symmetry, domain bounds)."""


class TopologyError(PlateMorphError):
    """Mesh file lacks the required structured-grid topology."""


class UnsupportedTargetError(PlateMorphError):
    """Target surface has nonnegative Gaussian curvature."""


class InfeasibleTargetError(PlateMorphError):
    """No printing-angle candidate reaches the target curvatures."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class OverConstrainedError(PlateMorphError):
    """Every candidate was rejected by the filtering criteria."""

    def __init__(self, message, reasons=()):
        super().__init__(message)
        self.reasons = list(reasons)
