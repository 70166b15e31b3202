"""Exception types shared across the package."""


class PlumetraceError(Exception):
    """Base class for all plumetrace errors."""


class DataFormatError(PlumetraceError):
    """A file or serialized payload could not be read or fails its schema."""


class NumericalError(PlumetraceError):
    """A numerical operation is undefined (singular covariance, degenerate series)."""
