"""Exception hierarchy shared by every fracgraph module."""


class FracGraphError(Exception):
    """Base class for all package errors."""


class NonconvergedQuadrature(FracGraphError):
    pass


class PointNotOnBoundary(FracGraphError):
    pass


class OverlappingRegions(FracGraphError):
    pass


class InvalidRegion(FracGraphError):
    pass


class RampTooWide(FracGraphError):
    pass


class StalledStep(FracGraphError):
    pass


class GraphsDifferOutsideWindow(FracGraphError):
    pass


class WindowTooShort(FracGraphError):
    pass


class EnvelopeViolated(FracGraphError):
    pass


class DomainViolation(FracGraphError):
    pass


class PreconditionError(FracGraphError):
    """An experiment hypothesis on the exterior datum does not hold."""


class SolverFailed(FracGraphError):
    pass


class AssertionFailed(FracGraphError):
    """A post-solve property check failed; carries the offending node."""

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value
