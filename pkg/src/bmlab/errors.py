"""Exception hierarchy shared by all bmlab modules."""


class BMLabError(ValueError):
    """Base class for every error raised by bmlab."""


class NonFiniteIntegrand(BMLabError):
    pass


class NoRank(BMLabError):
    pass


class ShiftExceedsRank(BMLabError):
    pass


class CorrelationOutOfRange(BMLabError):
    pass


class ModelParseError(BMLabError):
    pass


class InvalidSize(BMLabError):
    pass


class EmbeddingNotPSD(BMLabError):
    pass


class NotPSD(BMLabError):
    pass


class NotSummable(BMLabError):
    pass


class TooFewReplicates(BMLabError):
    pass


class NegativeVariance(BMLabError):
    pass


class AlphaOutOfRange(BMLabError):
    pass


class TooFewSamples(BMLabError):
    pass


class NonPositiveValue(BMLabError):
    pass


class NotCentered(BMLabError):
    pass


class BadVector(BMLabError):
    pass


class HUnbounded(BMLabError):
    pass


class DumpFormatError(BMLabError, OSError):
    """Raised when an ensemble dump file is malformed."""


class SeriesParseError(BMLabError):
    """Unrecognized function specification."""
