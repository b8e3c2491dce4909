"""Exception hierarchy for the heavysar package.

Two broad groups matter for the command line interface: input/validation
problems (exit code 1) and numerical failures encountered during otherwise
valid computations (exit code 2).
"""


class HeavySarError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ValidationError(HeavySarError, ValueError):
    """Invalid inputs: bad arguments, malformed files, broken preconditions."""

    exit_code = 1


class NumericalError(HeavySarError, ArithmeticError):
    """A computation failed on inputs that passed validation."""

    exit_code = 2


# -- geography / proximity ---------------------------------------------------

class DuplicateLocationError(ValidationError):
    """Two locations share identical coordinates, so 1/d is undefined."""


class KOutOfRangeError(ValidationError):
    """Neighbor count k outside 1..n-1."""


class IsolatedLocationError(ValidationError):
    """A location has no neighbors, so row standardization is undefined."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"location {index} has no neighbors")


class IsolatedSiteError(ValidationError):
    """An out-of-sample site has no in-sample neighbors."""


# -- regression / variance ---------------------------------------------------

class RankDeficientDesignError(ValidationError):
    """Design matrix does not have full column rank."""


class NeighborhoodTooSmallError(ValidationError):
    """A neighborhood has fewer than two members; the |N_i|-1 denominator fails."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"neighborhood of location {index} has fewer than 2 members")


class DegenerateVarianceError(NumericalError):
    """A local variance came out exactly zero; the scale matrix would be singular."""

    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"local variance at location {index} is zero")


# -- likelihood / fitting ----------------------------------------------------

class DomainError(ValidationError):
    """Argument outside the mathematical domain of a function."""


class DimensionMismatchError(ValidationError):
    """Array shapes are inconsistent."""


class NonPositiveSigmaError(DomainError):
    """Scale parameter sigma must be strictly positive."""


class SingularNormalEquationsError(NumericalError):
    """X' Sigma_Y^-1 X is numerically singular."""


class OptimizerFailureError(NumericalError):
    """The one-dimensional optimizer produced no usable interior evaluation."""


class NonPositiveShiftedResponseError(ValidationError):
    """Some y_i + m <= 0, so the power transform is undefined."""


# -- I/O ----------------------------------------------------------------------

class ParseError(ValidationError):
    """A data file could not be parsed; carries the offending position."""

    def __init__(self, line: int, column: str, message: str):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column!r}: {message}")


class MissingColumnError(ValidationError):
    """A required column is absent from the input file."""


class NonFiniteValueError(ValidationError):
    """A used cell holds NaN or infinity."""


class SchemaMismatchError(ValidationError):
    """A persisted artifact does not match the expected schema."""

    def __init__(self, key: str, message: str | None = None):
        self.key = key
        super().__init__(message or f"schema mismatch at key {key!r}")
