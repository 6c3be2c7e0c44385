"""Exception hierarchy shared across the package."""


class AcmError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(AcmError, ValueError):
    pass


class DimMismatch(AcmError, ValueError):
    pass


class EmptyIndex(AcmError, LookupError):
    pass


class NotFitted(AcmError, RuntimeError):
    pass


class InsufficientMemory(AcmError, RuntimeError):
    pass


class EmptyLog(AcmError, ValueError):
    pass


class EmptyTestSet(AcmError, ValueError):
    pass


class DelayTooLarge(AcmError, ValueError):
    pass


class EmptyInput(AcmError, ValueError):
    pass


class InvalidConfig(AcmError, ValueError):
    pass


class FormatError(AcmError, ValueError):
    """Base class for binary file format errors."""


class BadMagic(FormatError):
    pass


class TruncatedFile(FormatError):
    pass


class LabelOutOfRange(FormatError):
    pass


class NonFiniteFeature(FormatError):
    pass
