"""Exception hierarchy.

Precondition failures derive from :class:`PreconditionError`; the CLI maps
them to exit code 2.  :class:`DivergenceError` maps to exit code 3.
"""


class PolyshiftError(Exception):
    """Base class for all package errors."""


class PreconditionError(PolyshiftError, ValueError):
    """An input violates a documented precondition."""


class InvalidGeneratorError(PreconditionError):
    pass


class InvalidSizeError(PreconditionError):
    pass


class InvalidKError(PreconditionError):
    pass


class IsolatedVertexError(PreconditionError, ZeroDivisionError):
    """Normalized Laplacian requested on a graph with a degree-zero vertex."""


class DisconnectedGraphError(PreconditionError):
    pass


class WidthViolationError(PreconditionError):
    """Operator has a nonzero entry between vertices at distance > 1."""

    def __init__(self, i, j, width):
        self.i, self.j, self.width = int(i), int(j), width
        super().__init__(
            f"entry ({self.i}, {self.j}) spans geodesic distance {width}; "
            "a graph shift must have width <= 1"
        )


class DimensionMismatchError(PreconditionError):
    pass


class NonCommutingError(PreconditionError):
    pass


class TriangularizationError(PolyshiftError):
    """Simultaneous triangularization residual exceeded its tolerance."""


class NonDistinctSpectrumError(PreconditionError):
    pass


class DenseCapError(PreconditionError):
    pass


class DegreeCapError(PreconditionError):
    pass


class SingularFilterError(PreconditionError):
    """Filter vanishes at a spectrum point or on the approximation box."""

    def __init__(self, msg, points=None):
        super().__init__(msg)
        self.points = points


class RepeatedRootError(PreconditionError):
    pass


class StabilityError(PreconditionError):
    pass


class StructuredShiftError(PreconditionError):
    pass


class InsufficientSamplesError(PolyshiftError):
    pass


class NotPositiveDefiniteError(PreconditionError):
    pass


class DataFormatError(PreconditionError):
    """Malformed input file; carries the offending row/column when known."""

    def __init__(self, msg, row=None, col=None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", col {col})" if col is not None else ")")
        super().__init__(msg + loc)
        self.row, self.col = row, col


class DivergenceError(PolyshiftError):
    pass
