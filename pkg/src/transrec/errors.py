"""Exception hierarchy shared across the package."""


class TransRecError(Exception):
    """Base class for all errors raised by this package."""


class DataError(TransRecError):
    """Bad or unusable input data (unreadable file, malformed line, empty result)."""


class ModelFileError(TransRecError):
    """A model file is corrupt, truncated, or inconsistent with a dataset."""


class NumericalError(TransRecError):
    """Training produced non-finite parameters."""
