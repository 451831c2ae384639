"""Exception types shared across the package."""


class PentimentoError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(PentimentoError):
    """An array's dimensions do not satisfy an operation's contract."""


class NumericError(PentimentoError):
    """Non-finite values (NaN/Inf) where finite input is required."""


class ConfigError(PentimentoError):
    """Invalid configuration value. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class WeightFormatError(PentimentoError):
    """Malformed weight file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class WeightTruncationError(WeightFormatError):
    """Weight file ends before a complete record."""


class DecodeError(PentimentoError):
    """Image bytes could not be decoded as PNG or JPEG."""


class StageError(PentimentoError):
    """A pipeline stage failed. ``stage`` names it; the cause is chained."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage
