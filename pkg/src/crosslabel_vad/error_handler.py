"""Centralized error handling for the training, evaluation and CLI layers."""

import traceback
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

import structlog

from .exceptions import (
    CrossLabelError,
    DataError,
    ErrorSeverity,
    NonFiniteError,
    RecoverySuggestion,
)

_LOG_METHOD = {
    ErrorSeverity.LOW: "info",
    ErrorSeverity.MEDIUM: "warning",
    ErrorSeverity.HIGH: "error",
    ErrorSeverity.CRITICAL: "critical",
}


class ErrorHandler:
    """Logs toolkit errors by severity and keeps a history for reporting."""

    def __init__(self, logger: Optional[Any] = None):
        self.logger = logger or structlog.get_logger(__name__)
        self._error_history: List[CrossLabelError] = []

    def handle_data_error(
        self,
        message: str,
        path: Optional[str] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> DataError:
        """Build, log and record a data error."""
        error = DataError(message=message, path=path, context=context)
        self.record(error)
        return error

    def handle_non_finite(
        self,
        op: str,
        epoch: Optional[int] = None,
        batch: Optional[int] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> NonFiniteError:
        """Build, log and record a non-finite value failure.

        The message names the epoch and batch when the failure happened inside
        the training loop.
        """
        where = ""
        if epoch is not None:
            where = f" at epoch {epoch}, batch {batch}"
        error = NonFiniteError(
            f"Non-finite value produced by '{op}'{where}",
            op=op,
            context={**(context or {}), "epoch": epoch, "batch": batch},
        )
        self.record(error)
        return error

    def handle_generic_error(
        self,
        message: str,
        severity: ErrorSeverity = ErrorSeverity.MEDIUM,
        recovery_suggestions: Optional[List[RecoverySuggestion]] = None,
        context: Optional[Dict[str, Any]] = None,
    ) -> CrossLabelError:
        """Handle errors that have no more specific type."""
        error = CrossLabelError(
            message=message,
            severity=severity,
            recovery_suggestions=recovery_suggestions,
            context=context,
        )
        self.record(error)
        return error

    def record(self, error: CrossLabelError) -> None:
        """Log an already constructed error and add it to the history."""
        self._log_error(error)
        self._error_history.append(error)

    def get_error_history(self) -> List[CrossLabelError]:
        """Get the history of handled errors."""
        return self._error_history.copy()

    def clear_error_history(self) -> None:
        """Clear the error history."""
        self._error_history.clear()

    def _log_error(self, error: CrossLabelError) -> None:
        method = _LOG_METHOD.get(error.severity, "warning")
        getattr(self.logger, method)(
            "error_handled",
            error_type=error.__class__.__name__,
            message=error.message,
            exit_code=error.exit_code,
        )
        if error.context:
            self.logger.debug("error_context", **_loggable(error.context))

    @contextmanager
    def error_context(self, operation: str, **context_data: Any) -> Iterator[None]:
        """Wrap unexpected exceptions raised inside ``operation``.

        Toolkit errors are recorded and re-raised unchanged; anything else is
        converted into a ``CrossLabelError`` that keeps the traceback.
        """
        try:
            yield
        except CrossLabelError as e:
            if e not in self._error_history:
                self.record(e)
            raise
        except Exception as e:
            error = self.handle_generic_error(
                message=f"Unexpected error during {operation}: {str(e)}",
                severity=ErrorSeverity.HIGH,
                context={
                    "operation": operation,
                    "original_exception": str(e),
                    "traceback": traceback.format_exc(),
                    **context_data,
                },
            )
            raise error from e


def _loggable(context: Dict[str, Any]) -> Dict[str, Any]:
    return {str(k): v for k, v in context.items() if k != "traceback"}


_global_error_handler = ErrorHandler()


def get_error_handler() -> ErrorHandler:
    """Get the global error handler instance."""
    return _global_error_handler


def set_error_handler(handler: ErrorHandler) -> None:
    """Set the global error handler instance."""
    global _global_error_handler
    _global_error_handler = handler
