
from typing import Optional


class LGAEError(RuntimeError):
    """Base class for every failure raised by the package."""


class ConfigError(LGAEError):
    """Raised when a configuration value is out of range or inconsistent."""


class MalformedDatasetError(LGAEError):
    """Raised when a dataset violates its structural invariants."""


class DatasetParseError(MalformedDatasetError):
    """Raised when a dataset file line cannot be parsed."""

    def __init__(self, message: str, line_number: int, path: Optional[str] = None):
        location = f"{path}:{line_number}" if path else f"line {line_number}"
        super().__init__(f"{location}: {message}")
        self.line_number = line_number
        self.path = path


class IntegrityError(LGAEError):
    """Raised when dataset files do not match their manifest."""


class ContractViolationError(LGAEError):
    """Raised when an operation's precondition does not hold."""


class ShapeMismatchError(ContractViolationError):
    """Raised when matrix shapes do not chain."""


class NumericFailureError(LGAEError):
    """Raised when a tensor becomes non-finite."""

    def __init__(self, message: str, tensor: Optional[str] = None):
        super().__init__(message)
        self.tensor = tensor


class DegenerateGraphError(LGAEError):
    """Raised when a reconstruction target has no positive pairs."""


class SamplingExhaustedError(LGAEError):
    """Raised when negative sampling cannot find enough non-edges."""


class CacheFormatError(LGAEError):
    """Raised when a binary cache or checkpoint file is not in the expected layout."""


class CacheWriteError(LGAEError):
    """Raised when a cache or checkpoint file cannot be written."""
