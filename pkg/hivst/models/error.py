"""
Error response models for machine-readable error output
"""
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class ErrorType(str, Enum):
    """Error categories, one per process exit status"""
    CONFIG_ERROR = "config_error"
    DATA_ERROR = "data_error"
    NUMERICAL_ERROR = "numerical_error"
    SYSTEM_ERROR = "system_error"


class ErrorDetail(BaseModel):
    """A single field- or row-level problem"""
    field: Optional[str] = Field(default=None, description="Offending key, column or parameter")
    message: str = Field(description="Human readable description")
    code: Optional[str] = Field(default=None, description="Short machine code")
    context: Dict[str, Any] = Field(default_factory=dict, description="Extra context")


class ErrorResponse(BaseModel):
    """Error document written to stderr under --json-errors"""
    error_type: ErrorType
    message: str
    exit_code: int
    command: Optional[str] = None
    details: List[ErrorDetail] = Field(default_factory=list)
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
