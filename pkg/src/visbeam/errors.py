"""Exception hierarchy shared by all visbeam modules."""


class VisbeamError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(VisbeamError, ValueError):
    """Invalid configuration value.

    ``path`` names the offending field (e.g. ``"wireless.num_beams"``) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DimensionMismatch(VisbeamError, ValueError):
    pass


class DelayOutOfRange(VisbeamError, ValueError):
    pass


class EmptyVector(VisbeamError, ValueError):
    pass


class WrongLength(VisbeamError, ValueError):
    pass


class CoincidentPoint(VisbeamError, ValueError):
    pass


class SchemaError(VisbeamError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ColumnMissing(VisbeamError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "column missing"


class ParseError(VisbeamError, ValueError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class TooFewSamples(VisbeamError, ValueError):
    pass


class NonFinite(VisbeamError, ValueError):
    pass


class DegenerateDesign(VisbeamError, ArithmeticError):
    pass


class LengthMismatch(VisbeamError, ValueError):
    pass


class LabelOutOfRange(VisbeamError, ValueError):
    pass


class ShapeMismatch(VisbeamError, ValueError):
    pass


class EmptyDataset(VisbeamError, ValueError):
    pass


class BadK(VisbeamError, ValueError):
    pass


class IndexOutOfRange(VisbeamError, IndexError):
    pass


class DegenerateGroundTruth(VisbeamError, ValueError):
    pass


class EmptyFraction(VisbeamError, ValueError):
    pass
