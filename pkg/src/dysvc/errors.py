"""Exception hierarchy shared by every module of the package."""


class DysvcError(Exception):
    """Base class for all errors raised by dysvc."""


# signal I/O and framing
class SignalNotFound(DysvcError, FileNotFoundError):
    pass


class UnsupportedFormat(DysvcError):
    pass


class CorruptHeader(DysvcError):
    pass


class EmptySignal(DysvcError, ValueError):
    pass


class InconsistentMetadata(DysvcError, ValueError):
    pass


# rate modification
class FactorOutOfRange(DysvcError, ValueError):
    pass


# vocoder / features
class InvariantViolation(DysvcError, ValueError):
    pass


class NonPositiveEnvelope(DysvcError, ValueError):
    pass


class KindMismatch(DysvcError, ValueError):
    pass


class RangeViolation(DysvcError, ValueError):
    pass


class TooShort(DysvcError, ValueError):
    pass


class ContainerFormatError(DysvcError, ValueError):
    """A binary container has the wrong magic, version or size."""


# dcgan
class ShapeMismatch(DysvcError, ValueError):
    pass


class EmptyTrainingSet(DysvcError, ValueError):
    pass


# pitch
class TooFewVoicedFrames(DysvcError, ValueError):
    pass


class ZeroHealthyVariance(DysvcError, ValueError):
    pass


class EmptyAlsStats(DysvcError, ValueError):
    pass


# evaluation
class TooFewPoints(DysvcError, ValueError):
    pass


class SingleClass(DysvcError, ValueError):
    pass


class SchemaMismatch(DysvcError, ValueError):
    pass


# pipeline
class ParseError(DysvcError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class DuplicateEntry(ParseError):
    pass


class MissingFile(ParseError):
    pass


class NoCounterpartGender(DysvcError, ValueError):
    pass


class ArtifactMissing(DysvcError, FileNotFoundError):
    pass


class ConfigError(DysvcError, ValueError):
    pass
