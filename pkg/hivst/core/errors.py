"""
Exception hierarchy for hivst

Every error the library raises on purpose derives from HivstError and
carries the process exit status the command line maps it to.
"""
from typing import Any, Dict, List, Optional

from ..models.error import ErrorDetail, ErrorResponse, ErrorType

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _restore_error(cls, message: str, state: Dict[str, Any]) -> "HivstError":
    error = cls.__new__(cls)
    Exception.__init__(error, message)
    error.__dict__.update(state)
    return error


class HivstError(Exception):
    """Base class for application exceptions"""

    error_type: ErrorType = ErrorType.SYSTEM_ERROR
    exit_code: int = EXIT_UNEXPECTED

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def __reduce__(self):
        # Subclass constructors differ; rebuild from state when crossing process boundaries
        return (_restore_error, (type(self), self.message, self.__dict__))

    def to_response(self, command: Optional[str] = None) -> ErrorResponse:
        """Build the machine-readable error document"""
        items: List[ErrorDetail] = []
        for problem in self.details.get("problems", []):
            items.append(ErrorDetail(**problem))
        context = {k: v for k, v in self.details.items() if k != "problems"}
        if context:
            items.append(ErrorDetail(message="context", context=context))
        return ErrorResponse(
            error_type=self.error_type,
            message=self.message,
            exit_code=self.exit_code,
            command=command,
            details=items,
        )


class ConfigError(HivstError):
    """Missing or invalid study configuration"""

    error_type = ErrorType.CONFIG_ERROR
    exit_code = EXIT_CONFIG

    def __init__(self, message: str, keys: Optional[List[str]] = None, problems: Optional[List[Dict[str, Any]]] = None):
        details: Dict[str, Any] = {}
        if keys:
            details["keys"] = keys
        if problems:
            details["problems"] = problems
        super().__init__(message, details)
        self.keys = keys or []


class DataError(HivstError):
    """Unreadable or invalid input data"""

    error_type = ErrorType.DATA_ERROR
    exit_code = EXIT_DATA

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None, field: Optional[str] = None):
        details: Dict[str, Any] = {}
        if path is not None:
            details["path"] = path
        if line is not None:
            details["line"] = line
        if field is not None:
            details["field"] = field
        super().__init__(message, details)
        self.path = path
        self.line = line
        self.field = field


class ParameterError(DataError, ValueError):
    """A model parameter violates its type invariants"""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message, field=field)


class CalibrationError(DataError):
    """Surveillance aggregates cannot be turned into stage parameters"""

    def __init__(self, message: str, jurisdiction: Optional[str] = None):
        super().__init__(message)
        self.jurisdiction = jurisdiction
        if jurisdiction is not None:
            self.details["jurisdiction"] = jurisdiction


class DegenerateJurisdiction(CalibrationError):
    """No undiagnosed population to seed the unaware compartments"""


class NumericalError(HivstError):
    """Non-finite values, singular matrices or failed searches"""

    error_type = ErrorType.NUMERICAL_ERROR
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message, {"stage": stage} if stage else None)
        self.stage = stage


class NoSignChange(NumericalError):
    """Incidence change never reaches zero inside the search bracket"""

    def __init__(self, message: str, gamma: float, chi_cap: float):
        super().__init__(message, stage="threshold")
        self.gamma = gamma
        self.chi_cap = chi_cap
        self.details.update({"gamma": gamma, "chi_cap": chi_cap})
