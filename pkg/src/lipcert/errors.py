"""Exception hierarchy shared by every lipcert module."""


class LipcertError(Exception):
    """Base class for all lipcert failures."""


class InvalidInputError(LipcertError, ValueError):
    """Malformed numeric input (non-finite entries, bad parameters)."""


class ShapeError(InvalidInputError):
    """Dimension mismatch between operands."""


class ParseError(InvalidInputError):
    """A lipnet document could not be parsed or validated."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedNormError(LipcertError):
    """The requested (input, output) norm pair has no exact closed form."""


class NotApplicableError(LipcertError):
    """A bound's hypotheses do not hold for the given network."""


class BudgetExceededError(LipcertError):
    """An enumeration would exceed its configured budget."""


class InternalConsistencyError(LipcertError):
    """Computed bounds violate an ordering that must hold mathematically."""
