"""Custom exceptions for the cross-label anomaly detection toolkit."""

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional


class ErrorSeverity(Enum):
    """Severity levels for errors."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


@dataclass
class RecoverySuggestion:
    """Represents a recovery suggestion for an error."""

    action: str
    description: str
    priority: int = 1  # Lower numbers = higher priority


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class CrossLabelError(Exception):
    """Base exception for all toolkit errors."""

    exit_code: int = EXIT_DATA

    def __init__(
        self,
        message: str,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        recovery_suggestions: Optional[List[RecoverySuggestion]] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.message = message
        self.severity = severity
        self.recovery_suggestions = recovery_suggestions or []
        self.context = context or {}

    def add_recovery_suggestion(self, suggestion: RecoverySuggestion) -> None:
        """Add a recovery suggestion to this error."""
        self.recovery_suggestions.append(suggestion)
        self.recovery_suggestions.sort(key=lambda x: x.priority)

    def get_formatted_message(self) -> str:
        """Get a formatted error message with recovery suggestions."""
        message = f"[{self.severity.value.upper()}] {self.message}"

        if self.recovery_suggestions:
            message += "\n\nRecovery suggestions:"
            for i, suggestion in enumerate(self.recovery_suggestions, 1):
                message += f"\n{i}. {suggestion.action}: {suggestion.description}"

        return message


# ---------------------------------------------------------------------------
# Usage errors (exit 1)


class UsageError(CrossLabelError):
    """Bad command line or API usage."""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, flag: Optional[str] = None, **kwargs: Any):
        kwargs.setdefault("severity", ErrorSeverity.LOW)
        super().__init__(message, **kwargs)
        self.flag = flag
        if flag and not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Check flags", f"Pass {flag} or run with --help for usage", 1
                )
            )


class ConfigError(UsageError):
    """Invalid configuration value or malformed config file."""

    def __init__(self, message: str, key: Optional[str] = None, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.key = key
        if not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Fix config",
                    "Config files use one 'key = value' pair per line",
                    1,
                )
            )


class PreconditionError(UsageError):
    """An operation was invoked before its inputs exist."""


class UntrainedModelError(PreconditionError):
    """Pseudo labels were requested from a model that was never trained."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, **kwargs)
        if not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Train stage 1", "Run 'train --stage 1' or load a checkpoint", 1
                )
            )


# ---------------------------------------------------------------------------
# Data errors (exit 2)


class DataError(CrossLabelError):
    """Problems with files, manifests or dataset contents."""

    exit_code = EXIT_DATA

    def __init__(self, message: str, path: Optional[str] = None, **kwargs: Any):
        kwargs.setdefault("severity", ErrorSeverity.HIGH)
        super().__init__(message, **kwargs)
        self.path = path


class FeatureFormatError(DataError):
    """Malformed feature or checkpoint file."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, **kwargs)
        if not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Regenerate file",
                    "Rewrite the file with write_features or the synth command",
                    1,
                )
            )


class BadMagicError(FeatureFormatError):
    """File does not start with the expected magic bytes."""


class VersionMismatchError(FeatureFormatError):
    """File format version is not supported."""


class TruncatedPayloadError(FeatureFormatError):
    """Payload is shorter than its header promises."""

    def __init__(
        self, message: str, expected: int = 0, actual: int = 0, **kwargs: Any
    ):
        super().__init__(message, **kwargs)
        self.expected = expected
        self.actual = actual


class DimensionOverflowError(FeatureFormatError):
    """Header dimensions are zero or exceed the supported range."""


class DatasetError(DataError):
    """Invalid dataset manifest or inconsistent dataset contents."""

    def __init__(self, message: str, video_id: Optional[str] = None, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.video_id = video_id


class ManifestError(DatasetError):
    """Manifest does not parse."""


class MissingFileError(DatasetError):
    """A referenced file does not exist."""


class LabelRangeError(DatasetError):
    """A label id lies outside 0..M-1."""


class DimensionMismatchError(DatasetError):
    """Feature dimension differs between sequences of one dataset."""


class MissingPseudoTrackError(DataError):
    """Stage 2 could not find a pseudo track for a video."""

    def __init__(self, message: str, video_id: Optional[str] = None, **kwargs: Any):
        super().__init__(message, **kwargs)
        self.video_id = video_id
        if not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Generate pseudo tracks",
                    "Run the 'pseudo' command on a trained stage-1 checkpoint",
                    1,
                )
            )


class MetricUndefinedError(DataError):
    """Metric cannot be computed for the given labels."""


# ---------------------------------------------------------------------------
# Numeric errors (exit 3)


class NumericError(CrossLabelError):
    """Numerical failure inside the differentiable kernel or training loop."""

    exit_code = EXIT_NUMERIC

    def __init__(self, message: str, op: Optional[str] = None, **kwargs: Any):
        kwargs.setdefault("severity", ErrorSeverity.CRITICAL)
        super().__init__(message, **kwargs)
        self.op = op


class NonFiniteError(NumericError):
    """NaN or infinity produced by an operation."""

    def __init__(self, message: str, **kwargs: Any):
        super().__init__(message, **kwargs)
        if not self.recovery_suggestions:
            self.add_recovery_suggestion(
                RecoverySuggestion(
                    "Lower learning rate",
                    "Reduce --lr or check the input features for extreme values",
                    1,
                )
            )


class ShapeMismatchError(NumericError):
    """Operands have incompatible shapes."""


class ZeroNormError(NumericError):
    """A vector that must be normalized has zero length."""
