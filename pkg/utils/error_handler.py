"""
Centralized error handling for the AttractorLab project.
"""

from typing import Optional

from utils.logger import LoggerMixin


class LabError(Exception):
    """Base exception class for AttractorLab."""

    def __init__(self, message: str, original_error: Optional[Exception] = None):
        super().__init__(message)
        self.message = message
        self.original_error = original_error


class SpanTooShort(LabError):
    """Raised when a signal does not cover the time span an operation needs."""

    def __init__(self, message: str, span: float, required: float,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.span = span
        self.required = required


class InvalidSignal(LabError):
    """Raised when signal data is malformed or non-finite."""

    def __init__(self, message: str, reason: str = "invalid data",
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.reason = reason


class MisalignedOffset(LabError):
    """Raised when a time offset is not a multiple of the grid step."""

    def __init__(self, message: str, offset: float, dt: float,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.offset = offset
        self.dt = dt


class InvalidParameter(LabError):
    """Raised when a numeric parameter is outside its admissible range."""

    def __init__(self, message: str, parameter: str,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.parameter = parameter


class ResolutionTooCoarse(LabError):
    """Raised when a grid cannot resolve a generator's features."""

    def __init__(self, message: str, parameter: str, limit: float,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.parameter = parameter
        self.limit = limit


class OutOfWindow(LabError):
    """Raised when an oracle is evaluated outside its validity window."""

    def __init__(self, message: str, time: float, window: tuple,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.time = time
        self.window = window


class UnstableStep(LabError):
    """Raised when a time step violates a stability bound or the state blows up."""

    def __init__(self, message: str, dt: float, limit: float,
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.dt = dt
        self.limit = limit


class InvalidState(LabError):
    """Raised when a solver state violates its constraints."""

    def __init__(self, message: str, reason: str = "invalid state",
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.reason = reason


class GridMismatch(LabError):
    """Raised when two signals that must share a grid do not."""

    def __init__(self, message: str, reason: str = "grids differ",
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.reason = reason


class ScenarioError(LabError):
    """Raised when a scenario pipeline fails."""

    def __init__(self, message: str, scenario: str, check: str = "",
                 original_error: Optional[Exception] = None):
        super().__init__(message, original_error)
        self.scenario = scenario
        self.check = check


class ErrorHandler(LoggerMixin):
    """Centralized error handling with logging."""

    def handle_error(self, error: Exception, context: str = "") -> str:
        log_message = f"{context}: {error}" if context else str(error)

        if isinstance(error, LabError):
            self.logger.error(log_message)
            if error.original_error:
                self.logger.debug("Original exception:", exc_info=error.original_error)
        else:
            self.logger.warning(log_message)

        return self._get_user_friendly_message(error)

    def _get_user_friendly_message(self, error: Exception) -> str:
        if isinstance(error, ScenarioError):
            where = f" at check '{error.check}'" if error.check else ""
            return f"Scenario '{error.scenario}' failed{where}: {error.message}"
        elif isinstance(error, SpanTooShort):
            return f"Signal span {error.span:g} is shorter than the required {error.required:g}: {error.message}"
        elif isinstance(error, MisalignedOffset):
            return f"Offset {error.offset:g} is not a multiple of dt={error.dt:g}: {error.message}"
        elif isinstance(error, ResolutionTooCoarse):
            return f"Grid too coarse for '{error.parameter}' (limit {error.limit:g}): {error.message}"
        elif isinstance(error, UnstableStep):
            return f"Unstable step dt={error.dt:g} (limit {error.limit:g}): {error.message}"
        elif isinstance(error, InvalidParameter):
            return f"Invalid parameter '{error.parameter}': {error.message}"
        elif isinstance(error, OutOfWindow):
            return f"Time {error.time:g} outside window {error.window}: {error.message}"
        elif isinstance(error, (InvalidSignal, InvalidState, GridMismatch)):
            return f"{type(error).__name__}: {error.message}"
        elif isinstance(error, LabError):
            return error.message

        if isinstance(error, FileNotFoundError):
            return f"File not found: {error.filename}"

        return f"An unexpected error occurred: {str(error)}"


_error_handler = ErrorHandler()


def handle_error(error: Exception, context: str = "") -> str:
    return _error_handler.handle_error(error, context)
