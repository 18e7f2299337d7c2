"""Exception hierarchy shared across the package."""


class DstrainError(Exception):
    """Base class for every error raised by this package."""


class EmptyEvidenceError(DstrainError):
    """Raw evidence contained no items."""


class AllZeroScoresError(DstrainError):
    """Every raw score was zero; there is no evidence to normalize."""


class DimensionMismatchError(DstrainError):
    """Vector/matrix shapes do not line up with the frame or model."""


class UnknownLabelError(DstrainError):
    """A label is not part of the frame of discernment."""


class FrameMismatchError(DstrainError):
    """Two mass functions do not share the same frame."""


class TotalConflictError(DstrainError):
    """Combination is undefined because the conflict K reached 1.

    ``step`` is the zero-based index of the failing fusion step when the
    error comes from a sequential fold, otherwise None.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class OutOfRangeError(DstrainError, ValueError):
    """A numeric argument lies outside its documented domain."""


class EmptyHistoryError(DstrainError):
    """No conflict value has been recorded yet."""


class NonPositiveFactorError(DstrainError):
    """Loss multiplication factors must be strictly positive."""


class InvalidConfigError(DstrainError):
    """An experiment or dataset configuration violates its constraints."""


class EmptyValidationSetError(DstrainError):
    """Validation requires at least one instance."""


class DegenerateBoxError(DstrainError):
    """A box has non-positive width or height."""


class NoClassesError(DstrainError):
    """An aggregate over classes received no classes."""


class ParseError(DstrainError):
    """Text input could not be parsed; the message carries the position."""


class ValidationError(DstrainError):
    """Parsed data violates a structural rule (e.g. scorecard tiling)."""


class MalformedXmlError(ParseError):
    """Annotation XML is not well formed."""


class MissingFieldError(ParseError):
    """A required XML field is absent; the message names its path."""


class InvalidBoxError(DstrainError):
    """An annotation box has xmin >= xmax or ymin >= ymax."""
