"""Exception types raised across the package."""


class DwloaError(Exception):
    """Base class for all errors raised by this package."""


class DatasetLoadError(DwloaError):
    """A required dataset file is missing or unreadable."""


class DatasetFormatError(DwloaError):
    """A dataset file is present but violates the expected format."""


class UnsupportedDatasetError(DwloaError):
    """The dataset is valid but outside what the library handles (e.g. multi-class)."""


class CoverageError(DwloaError):
    """A cluster assignment does not cover every hierarchy node."""


class NormalizationError(DwloaError):
    pass


class ClassError(DwloaError):
    """Training data does not contain both classes."""


class NumericError(DwloaError):
    """Non-finite values in an input matrix."""


class OracleSizeError(DwloaError):
    """Instance too large for the brute-force assignment oracle."""


class ResourceExhaustedError(DwloaError):
    """A computation would exceed the configured memory budget.

    Reported as ``OOM`` in benchmark tables.
    """

    def __init__(self, message, required_bytes=None, cap_bytes=None):
        super().__init__(message)
        self.required_bytes = required_bytes
        self.cap_bytes = cap_bytes
