"""
core/errors.py

Exception hierarchy shared by the simplicial, model, inference and
evaluation layers. Every error raised on purpose by the toolkit derives from
``SgmError`` so callers (the CLI, the experiment harness) can separate domain
failures from programming errors.
"""


class SgmError(RuntimeError):
    """Base exception for recoverable toolkit failures."""


class InvalidComplexError(SgmError):
    """Raised when a simplicial complex fails validation."""


class DanglingFaceError(InvalidComplexError):
    """Raised when a triangle references an edge that is not in the complex."""

    def __init__(self, triangle: tuple, missing_edge: tuple):
        super().__init__("Triangle %s has face %s which is not an edge of the "
                         "complex." % (triangle, missing_edge))
        self.triangle = triangle
        self.missing_edge = missing_edge


class DuplicateSimplexError(InvalidComplexError):
    """Raised when the same edge or triangle is listed twice."""

    def __init__(self, simplex: tuple):
        super().__init__("Simplex %s is listed more than once." % (simplex, ))
        self.simplex = simplex


class IndexOutOfRangeError(InvalidComplexError):
    """Raised when a simplex references a vertex outside [0, n_vertices)."""

    def __init__(self, simplex: tuple, n_vertices: int):
        super().__init__("Simplex %s references a vertex outside [0, %d)." %
                         (simplex, n_vertices))
        self.simplex = simplex
        self.n_vertices = n_vertices


class DimensionMismatchError(SgmError):
    """Raised when a vector or matrix does not match the complex."""

    def __init__(self, what: str, expected, actual):
        super().__init__("%s has dimension %s, expected %s." %
                         (what, actual, expected))
        self.what = what
        self.expected = expected
        self.actual = actual


class NotPositiveDefiniteError(SgmError):
    """Raised when a precision matrix fails the Cholesky pivot test."""

    def __init__(self, what: str, min_pivot: float | None = None):
        detail = "" if min_pivot is None else " (smallest pivot %.3e)" % min_pivot
        super().__init__("%s is not positive definite%s." % (what, detail))
        self.what = what
        self.min_pivot = min_pivot


class SingularBlockError(SgmError):
    """Raised when the eliminated block of a Schur complement is singular."""


class ConstraintViolatedError(SgmError):
    """Raised when factor (a) or (b) of the edge precision is not PD."""

    def __init__(self, constraint: str):
        factor = {
            'a': "I - B1^T diag(d_V) B1",
            'b': "I - B2 diag(d_T) B2^T",
        }.get(constraint, constraint)
        super().__init__("Constraint (%s) violated: %s is not positive "
                         "definite." % (constraint, factor))
        self.constraint = constraint


class InfeasibleStartError(SgmError):
    """Raised when a subproblem is started outside its feasible set."""


class NonpositiveCurvatureTraceError(SgmError):
    """Raised when tr(C (I - A - B)) <= 0 so the k update has no maximizer."""

    def __init__(self, trace_value: float):
        super().__init__("tr(C (I - A - B)) = %.6e is not positive; the "
                         "covariance is degenerate for this iterate." %
                         trace_value)
        self.trace_value = trace_value


class EmptySampleError(SgmError):
    """Raised when a covariance is requested from zero samples."""


class DegenerateCovarianceError(SgmError):
    """Raised when the sample covariance has zero trace."""


class ZeroTruthNormError(SgmError):
    """Raised when the NMSE denominator vanishes."""


class ArtifactFormatError(SgmError):
    """Raised when a JSON or CSV artifact does not follow its schema."""

    def __init__(self, path: str, reason: str):
        super().__init__("Malformed artifact '%s': %s" % (path, reason))
        self.path = path
        self.reason = reason


class InvalidParamsError(SgmError):
    """Raised when SGM parameters violate their sign constraints."""
