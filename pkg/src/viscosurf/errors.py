"""Exception types shared across the package."""


class ViscosurfError(Exception):
    """Base class for all package errors."""


class NearZero(ViscosurfError):
    """A vector that must be normalized has near-zero length."""


class BadParam(ViscosurfError):
    """A parameter is outside its documented range."""


class DegenerateFace(ViscosurfError):
    """A face Jacobian fails the rank tolerance."""


class OrientationError(ViscosurfError):
    """The face normal field is sign-inconsistent at a vertex."""


class UnsupportedAmbient(ViscosurfError):
    """An operation requires ambient dimension 4."""


class ParseError(ViscosurfError):
    """A mesh file failed to parse.

    Carries the 1-based line number of the offending line.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ViscosurfError):
    """A mesh or immersion violates a structural invariant."""


class SolveFailure(ViscosurfError):
    """An SPD solve did not reach the requested tolerance."""


class LineSearchStall(ViscosurfError):
    """No step above the minimum step size decreases the energy.

    The partially completed flow result, when available, is attached as
    ``result`` so callers can inspect or dump the state.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class SupportViolation(ViscosurfError):
    """A test function is not supported away from the boundary image."""


class MeshMismatch(ViscosurfError):
    """Immersions in a sequence do not share mesh combinatorics."""
