from typing import Any

__all__ = [
    "FormatError",
    "TruncationError",
    "DataError",
    "DimensionMismatchError",
    "StateError",
    "NonFiniteLossError",
    "ConfigError",
    "GradientCheckError",
]


class FormatError(ValueError):
    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class TruncationError(FormatError):
    pass


class DataError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    def __init__(self, message: str, expected: tuple[int, ...], actual: tuple[int, ...]):
        super().__init__(f"{message} (expected {expected}, got {actual})")
        self.expected = expected
        self.actual = actual


class StateError(RuntimeError):
    pass


class NonFiniteLossError(ArithmeticError):
    def __init__(self, message: str, case_id: str | None = None, breakdown: Any = None):
        super().__init__(message)
        self.case_id = case_id
        self.breakdown = breakdown


class ConfigError(ValueError):
    pass


class GradientCheckError(AssertionError):
    def __init__(self, message: str, max_relative_error: float):
        super().__init__(message)
        self.max_relative_error = max_relative_error
