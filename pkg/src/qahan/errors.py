"""Exception hierarchy shared by all qahan modules."""


class QahanError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(QahanError, ValueError):
    """Operand shapes do not agree."""


class CapabilityError(QahanError):
    """A backend refuses a problem outside its supported size."""


class ConfigError(QahanError, ValueError):
    """Invalid configuration; the message names the offending field."""


class ScheduleError(QahanError, ValueError):
    """Anneal schedule is not monotone or violates its boundary values."""


class DataFormatError(QahanError, ValueError):
    """Dataset file does not follow its binary format."""


class BadMagicError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class LabelRangeError(DataFormatError):
    pass


class EmptyDatasetError(DataFormatError):
    pass


class StaleCacheError(QahanError, RuntimeError):
    """backward() called without a matching forward() pass."""
