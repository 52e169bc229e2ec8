"""Exception hierarchy shared by every flatflow module."""


class FlatflowError(Exception):
    """Base class for all errors raised by flatflow."""


# -- parsing ------------------------------------------------------------------

class ParseError(FlatflowError):
    pass


class SurfaceSyntaxError(ParseError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class DuplicatePolygonId(ParseError):
    pass


class BadFraction(ParseError):
    pass


# -- validation ---------------------------------------------------------------

class ValidationError(FlatflowError):
    pass


class EdgeLengthMismatch(ValidationError):
    def __init__(self, gluing, delta):
        self.gluing = gluing
        self.delta = delta
        super().__init__(f"gluing {gluing}: edge lengths differ by {delta:.3e}")


class TurnMismatch(ValidationError):
    def __init__(self, gluing, declared, geometric):
        self.gluing = gluing
        self.declared = declared
        self.geometric = geometric
        super().__init__(
            f"gluing {gluing}: declared part {declared} but geometry gives "
            f"{geometric:.12f} turns"
        )


class NonConvexPolygon(ValidationError):
    def __init__(self, polygon_id, reason="not strictly convex"):
        self.polygon_id = polygon_id
        super().__init__(f"polygon {polygon_id!r}: {reason}")


class DanglingEdgeRef(ValidationError):
    pass


class EdgeReused(ValidationError):
    pass


class GaussBonnetViolation(ValidationError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"Gauss-Bonnet residual {residual:.3e}")


class ConeSnapFailure(ValidationError):
    pass


class DisconnectedSurface(ValidationError):
    pass


# -- holonomy -----------------------------------------------------------------

class RationalitySnapAmbiguous(FlatflowError):
    def __init__(self, value, candidates):
        self.value = value
        self.candidates = candidates
        super().__init__(f"{value!r} is within tolerance of several fractions: {candidates}")


class RationalitySnapFailure(FlatflowError):
    pass


class LoopNotClosed(FlatflowError):
    pass


# -- flow ---------------------------------------------------------------------

class FlowError(FlatflowError):
    pass


class SingularHit(FlowError):
    def __init__(self, polygon, vertex, t, point=None):
        self.polygon = polygon
        self.vertex = vertex
        self.t = t
        self.point = point
        super().__init__(f"trajectory hit corner {vertex} of polygon {polygon!r} at t={t:.9g}")


class NumericStall(FlowError):
    pass


class InvalidStart(FlowError):
    pass


class WallEncountered(FlowError):
    pass


# -- covers -------------------------------------------------------------------

class CoverError(FlatflowError):
    pass


class NoBoundary(CoverError):
    pass


class HasBoundary(CoverError):
    pass


class AlreadyOrientable(CoverError):
    pass


class NotOrientable(CoverError):
    pass


class BranchPointLift(CoverError):
    pass


class SingularProject(CoverError):
    pass


class RamificationHit(CoverError):
    pass


# -- ergodicity ---------------------------------------------------------------

class DepthTooLarge(FlatflowError):
    pass


class CheckpointBeyondLength(FlatflowError):
    pass


class UnknownTestFunction(FlatflowError):
    pass


class ModeSurfaceMismatch(FlatflowError):
    pass
