"""
Module: errors
Description: Exceptions raised across the lab. Every error a command can recover from derives from `LabError`.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all expected failures of the lab."""


class AssemblyError(LabError):
    """Raised when assembly text does not follow the documented grammar."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ExecutionError(LabError):
    """Raised by the VM (cycle budget exceeded, uninitialized memory read)."""


class DatasetError(LabError):
    """Raised on invalid campaigns, splits, statistics or corrupted trace files."""


class TrainingError(LabError):
    """Raised when a classifier cannot be trained or queried."""


class TemplateError(LabError):
    """Raised when Gaussian templates cannot be estimated."""


class CountermeasureError(LabError):
    """Raised by the insertion-point search, noise selection and insertion pass."""


class ArtifactError(LabError):
    """Raised when a command is missing an artifact produced by an earlier stage."""
