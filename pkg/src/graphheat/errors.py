"""Exception hierarchy shared by all graphheat modules."""


class GraphHeatError(Exception):
    """Base class for all graphheat errors."""


class InvalidParameterError(GraphHeatError, ValueError):
    """A parameter violates its documented domain (naming the parameter)."""


class SelfLoopError(GraphHeatError, ValueError):
    """An edge joins a vertex to itself."""


class NonPositiveWeightError(GraphHeatError, ValueError):
    """An edge weight is zero or negative."""


class NonPositiveMeasureError(GraphHeatError, ValueError):
    """A vertex measure is zero or negative."""


class DuplicateEdgeError(GraphHeatError, ValueError):
    """The same unordered vertex pair appears more than once."""


class DisconnectedError(GraphHeatError, ValueError):
    """The graph is not connected."""


class ParseError(GraphHeatError, ValueError):
    """A graph file could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionMismatchError(GraphHeatError, ValueError):
    """A vertex field does not match the domain's vertex count."""


class NoConvergenceError(GraphHeatError, RuntimeError):
    """An iterative solver hit its iteration budget before converging."""


class MonotonicityViolationError(GraphHeatError, RuntimeError):
    """An exhaustion sequence increased beyond the allowed slack."""


class IntegrationFailureError(GraphHeatError, RuntimeError):
    """Time integration could not reach the requested time/tolerance."""


class UnderflowWindowError(GraphHeatError, RuntimeError):
    """Kernel values underflow to zero inside the requested window."""


class ContractionViolatedError(GraphHeatError, RuntimeError):
    """A fixed-point slab failed the contraction-factor guard."""


class PicardStallError(GraphHeatError, RuntimeError):
    """Fixed-point iteration on a slab did not converge in the budget."""


class GridMismatchError(GraphHeatError, ValueError):
    """Requested times are not compatible with a stored trajectory grid."""


class ConsistencyError(GraphHeatError, RuntimeError):
    """A cross-check identity failed beyond its tolerance."""


class WindowTooShortError(GraphHeatError, ValueError):
    """A time grid is too short to support the requested check."""


class NoBoundInHorizonError(GraphHeatError, RuntimeError):
    """No upper bound was found inside the configured search cap."""


class ConfigError(GraphHeatError, ValueError):
    """An experiment configuration is invalid; names the field path."""
