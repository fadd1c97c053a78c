"""Exception hierarchy shared by every module."""


class AsReachError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(AsReachError, ValueError):
    pass


class NonRationalParameter(AsReachError, ValueError):
    """A distribution parameter has no exact rational value (nan, inf, ...)."""


class NotPositivelySpanning(AsReachError, ValueError):
    pass


class InvalidOrdering(AsReachError, ValueError):
    pass


class PreconditionViolation(AsReachError, ValueError):
    pass


class DegenerateGeometry(PreconditionViolation):
    pass


class OutsidePolytope(AsReachError, ValueError):
    pass


class VertexOnBoundary(AsReachError, ValueError):
    pass


class InvalidPath(AsReachError, ValueError):
    pass


class PlanningBudgetExhausted(AsReachError, RuntimeError):
    pass


class NotReachable(PreconditionViolation):
    """Raised when the system fails the positive-spanning test.

    ``witness`` is a nonzero rational direction ``w`` with ``mean . w <= 0``
    for every mode.
    """

    def __init__(self, witness, message="cannot guarantee almost-sure reachability"):
        super().__init__(message)
        self.witness = tuple(witness)


class StepBudgetExhausted(AsReachError, RuntimeError):
    pass


class SafetyViolationDetected(AsReachError, RuntimeError):
    pass


class ScenarioError(AsReachError, ValueError):
    """Invalid scenario document; ``pointer`` is a JSON pointer to the culprit."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class DimensionNot2D(AsReachError, ValueError):
    """Rendering is only defined for planar scenarios."""
