"""Exception hierarchy shared by all grim modules."""


class GrimError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(GrimError):
    """Operand dimensions are inconsistent with the operation."""


class DivisibilityError(GrimError):
    """A block grid does not evenly divide the matrix dimensions."""


class AlphaError(GrimError):
    """Target zero fraction is outside [0, 1)."""


class PermError(GrimError):
    """An array that must be a permutation of [0, rows) is not."""


class ConsistencyError(GrimError):
    """Mask, plan, and weights disagree with each other."""


class FormatError(GrimError):
    """A serialized container violates its format invariants."""


class DataError(GrimError):
    """The training dataset is empty or malformed."""


class MissingInputError(GrimError):
    """A graph input or weight tensor was not bound before execution."""


class EmptySpaceError(GrimError):
    """The tuning search space has no candidates."""


class NoCandidateError(GrimError):
    """No block-size candidate survives divisibility filtering."""


class UnsupportedLayerError(GrimError):
    """The operation does not support this layer kind."""


class ParseError(GrimError):
    """DSL text could not be parsed; carries source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownOpError(ParseError):
    """A statement names an operation the DSL does not define."""


class DanglingTensorError(ParseError):
    """A statement consumes a tensor that is never produced or declared."""
