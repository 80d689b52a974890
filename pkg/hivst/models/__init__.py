"""
Wire-level models for hivst
"""

from .error import ErrorDetail, ErrorResponse, ErrorType

__all__ = ["ErrorDetail", "ErrorResponse", "ErrorType"]
