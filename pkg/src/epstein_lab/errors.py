"""Exception types shared across the package."""


class EpsteinLabError(Exception):
    """Base class for all package errors."""


class ChartMismatch(EpsteinLabError):
    """Fields defined on different grid charts were combined."""


class MaskTooSparse(EpsteinLabError):
    """A chart's mask leaves no interior node with a full stencil."""


class DegenerateMetric(EpsteinLabError):
    """A metric tensor failed positive-definiteness at some node."""


class CriticalPoint(EpsteinLabError):
    """A holomorphic map has a vanishing derivative on the evaluation set."""

    def __init__(self, where):
        self.where = where
        super().__init__(f"critical point(s) of the map at {where}")


class UnsupportedDimension(EpsteinLabError):
    """Requested dimension is not implemented."""


class DegenerateFrame(EpsteinLabError):
    """Horosphere solve received linearly dependent frame vectors."""


class NoRealRoot(EpsteinLabError):
    """Horosphere incidence quadratic has no real root (invalid section)."""


class SingularEnvelope(EpsteinLabError):
    """Envelope construction failed at some nodes."""

    def __init__(self, nodes, message="envelope singular"):
        self.nodes = nodes
        super().__init__(f"{message} at {len(nodes)} node(s), first: {nodes[:5]}")


class DegenerateSurface(EpsteinLabError):
    """Embedded surface has a degenerate induced metric."""


class EigenvalueMinusOne(EpsteinLabError):
    """Shape operator has an eigenvalue at -1, E + B is singular."""


class SingularDictionary(EpsteinLabError):
    """E + B* is singular, the inverse dictionary is undefined."""


class DegenerateFrontCoefficients(EpsteinLabError):
    """a - b + c = 0: the determinant form of the Weingarten relation degenerates."""


class NotElliptic(EpsteinLabError):
    """Coefficient triple fails the ellipticity gate b^2 - 4ac > 0."""


class NewtonDiverged(EpsteinLabError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, trace, message="Newton iteration diverged"):
        self.trace = list(trace)
        super().__init__(f"{message}; residual trace {self.trace}")


class PositivityLost(EpsteinLabError):
    """Solution found but the tameness certificate is not positive definite."""


class ZeroDifferential(EpsteinLabError):
    """Quadratic differential vanishes on the evaluation set (foliation singularity)."""


class StepTooLarge(EpsteinLabError):
    """Finite-difference step leaves the admissible parameter domain."""


class UnknownSuite(EpsteinLabError):
    """Verification suite name not recognized."""


class ConfigInvalid(EpsteinLabError):
    """Problem or suite configuration failed validation."""


class IoError(EpsteinLabError):
    """File import/export failed."""
