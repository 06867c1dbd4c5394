"""Exception hierarchy for scorehazard.

Two families matter to callers: :class:`InputError` for anything wrong with
the data or arguments handed in, and :class:`FitError` for a model that could
not be estimated from otherwise valid data. The command line maps the first
to exit code 2 and the second to exit code 3.
"""

from typing import Optional, Sequence


class ScoreHazardError(Exception):
    """Base class for all scorehazard errors."""


class InputError(ScoreHazardError):
    """Invalid input data, schema or arguments."""


class SchemaError(InputError):
    """A required column is missing or the column layout is not recognised."""


class ParseError(InputError):
    """A cell could not be converted to the expected type.

    Attributes:
        row: Zero-based data row index (header excluded), if known.
        column: Name of the offending column, if known.
    """

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[str] = None
    ) -> None:
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class ValidationError(InputError):
    """Data parsed correctly but violates a structural invariant."""


class EmptyEventsError(InputError):
    """An operation that needs at least one responder event got none."""


class UnknownCovariateError(InputError, KeyError):
    """A covariate name was looked up that the fit or dataset does not hold."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class UnsupportedError(InputError):
    """The input is valid in general but not for this operation."""


class FitError(ScoreHazardError):
    """A model could not be estimated."""


class ConvergenceError(FitError):
    """Newton-Raphson did not converge, typically a monotone likelihood."""


class CollinearityError(FitError):
    """The information matrix is singular.

    Attributes:
        covariates: Names of the covariates spanning the singular direction.
    """

    def __init__(self, message: str, covariates: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.covariates = list(covariates)


class DimensionalityError(FitError):
    """Fewer responder events (or at-risk rows) than covariates."""


class EstimabilityError(FitError):
    """The additive model design is singular at the first event score."""


class NumericError(FitError):
    """A computation produced a non-finite value."""
