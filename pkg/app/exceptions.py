"""
Toolkit Exceptions

This module defines the exception hierarchy raised by the toolkit. Every
exception derives from ValueError so callers validating input can keep
catching the built-in type.
"""

from typing import Optional


class SRLToolkitError(ValueError):
    """Base class for all toolkit errors."""


class ConllParseError(SRLToolkitError):
    """Raised when a CoNLL 2009 row cannot be parsed."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ConllValidationError(ConllParseError):
    """Raised when a parsed CoNLL 2009 sentence violates a format invariant."""


class EmbeddingError(SRLToolkitError):
    """Raised for malformed vector files and failed PCA/CCA fits."""


class ShapeError(SRLToolkitError):
    """Raised when tensor operands have incompatible shapes."""


class ModelError(SRLToolkitError):
    """Raised for model configuration or vocabulary mismatches."""


class TrainingError(SRLToolkitError):
    """Raised when training cannot start or diverges."""


class ScoringError(SRLToolkitError):
    """Raised when gold and predicted corpora cannot be compared."""


class CheckpointError(SRLToolkitError):
    """Raised when a checkpoint container is missing or malformed."""
