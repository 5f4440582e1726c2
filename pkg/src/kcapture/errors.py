"""Exception hierarchy shared by the geometry, game and CLI layers."""

from __future__ import annotations


class KCaptureError(Exception):
    """Base class for every error raised by this package."""


class GeometryError(KCaptureError, ValueError):
    pass


class DimensionMismatchError(GeometryError):
    pass


class CoincidentPointError(GeometryError):
    """The query point sits on one of the input points (depth is ill-posed)."""


class HellyBoundError(GeometryError):
    def __init__(self, k: int, n: int, m: int):
        self.k, self.n, self.m = k, n, m
        bound = -(-n // (m + 1))
        super().__init__(
            f"k={k} outside the Helly range 1 <= k <= ceil(n/(m+1)) = ceil({n}/{m + 1}) = {bound}"
        )


class NotInteriorError(GeometryError):
    """Raised when a point is not strictly inside the k-Hull.

    ``direction`` is a unit vector u with g(u) <= 0, i.e. fewer than k input
    points make an acute angle with u.
    """

    def __init__(self, message: str, direction=None, g_value: float | None = None):
        super().__init__(message)
        self.direction = direction
        self.g_value = g_value


class DegenerateHullError(GeometryError):
    """The k-Hull is nonempty but has empty interior (a point or a segment)."""

    def __init__(self, message: str, vertices=None):
        super().__init__(message)
        self.vertices = vertices if vertices is not None else []


class DegenerateInstanceError(KCaptureError):
    """General-position perturbation failed to separate collinear pursuers."""


class PreconditionError(KCaptureError):
    pass


class IllegalMoveError(KCaptureError):
    def __init__(self, message: str, agent: str | None = None):
        super().__init__(message)
        self.agent = agent


class CoLocationError(KCaptureError):
    def __init__(self, message: str, pair=None):
        super().__init__(message)
        self.pair = pair


class InvariantViolation(KCaptureError):
    pass


class ScenarioValidationError(KCaptureError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


class TraceFormatError(KCaptureError):
    pass
