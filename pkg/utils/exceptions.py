"""
Custom exceptions for the person image synthesis application.
"""
from typing import Any, Dict, Optional


class PersonSynthError(Exception):
    """Base exception for person image synthesis errors."""
    pass


class ValidationError(PersonSynthError):
    """Raised for usage or validation failures (CLI exit code 2)."""
    pass


class InvalidArgumentError(ValidationError):
    """Raised when an argument has the wrong shape, range or value."""
    pass


class ConfigError(ValidationError):
    """Raised when a configuration key or value is invalid."""
    pass


class DatasetLayoutError(ValidationError):
    """Raised when a dataset directory does not follow the expected layout."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("Invalid dataset layout:\n" + "\n".join(f"  - {p}" for p in self.problems))


class DataLoadError(ValidationError):
    """Raised when a dataset file is missing or cannot be parsed."""

    def __init__(self, path: str, field: str, reason: str = "missing or unreadable"):
        self.path = path
        self.field = field
        super().__init__(f"Cannot load {field} from '{path}': {reason}")


class SampleRejectedError(ValidationError):
    """Raised when a sample does not meet the preprocessing size threshold."""
    pass


class MissingTorsoError(PersonSynthError):
    """Raised when a shoulder or hip landmark needed for the body-shape index is missing."""
    pass


class TrainingDivergedError(PersonSynthError):
    """Raised when a training loss becomes non-finite."""

    def __init__(self, message: str, snapshot: Optional[Dict[str, Any]] = None):
        self.snapshot = snapshot or {}
        super().__init__(message)


class CheckpointError(PersonSynthError):
    """Raised when a checkpoint cannot be written or restored."""
    pass


class BackendUnavailableError(PersonSynthError):
    """Raised when a classifier backend cannot be constructed."""

    def __init__(self, backend: str, reason: str = ""):
        self.backend = backend
        message = f"Classifier backend '{backend}' is unavailable"
        super().__init__(f"{message}: {reason}" if reason else message)


class MetricError(PersonSynthError):
    """Raised when a metric computation is numerically invalid."""
    pass
