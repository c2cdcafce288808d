"""Tests for the exception hierarchy and the centralized error handler."""

from unittest.mock import Mock

import pytest

from src.crosslabel_vad.error_handler import (
    ErrorHandler,
    get_error_handler,
    set_error_handler,
)
from src.crosslabel_vad.exceptions import (
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_USAGE,
    BadMagicError,
    ConfigError,
    CrossLabelError,
    DataError,
    ErrorSeverity,
    LabelRangeError,
    MetricUndefinedError,
    MissingPseudoTrackError,
    NonFiniteError,
    PreconditionError,
    RecoverySuggestion,
    ShapeMismatchError,
    UntrainedModelError,
    UsageError,
    ZeroNormError,
)


class TestCustomExceptions:
    """Test the exception classes and their exit codes."""

    def test_base_error_fields(self):
        """Test the base error keeps message, severity and context."""
        error = CrossLabelError(
            "Epoch 3 diverged", severity=ErrorSeverity.HIGH, context={"epoch": 3}
        )

        assert error.message == "Epoch 3 diverged"
        assert error.severity == ErrorSeverity.HIGH
        assert error.context == {"epoch": 3}
        assert error.exit_code == EXIT_DATA
        assert error.recovery_suggestions == []

    def test_suggestions_sorted_by_priority(self):
        """Test suggestions are kept in ascending priority order."""
        error = DataError("Feature file unreadable")

        error.add_recovery_suggestion(RecoverySuggestion("Rerun synth", "-", 3))
        error.add_recovery_suggestion(RecoverySuggestion("Check path", "-", 1))
        error.add_recovery_suggestion(RecoverySuggestion("Check disk", "-", 2))

        actions = [s.action for s in error.recovery_suggestions]
        assert actions == ["Check path", "Check disk", "Rerun synth"]

    def test_formatted_message(self):
        """Test the printed message lists numbered suggestions."""
        error = NonFiniteError("NaN in log")
        error.add_recovery_suggestion(RecoverySuggestion("Clip inputs", "Scale x", 2))

        formatted = error.get_formatted_message()

        assert formatted.startswith("[CRITICAL] NaN in log")
        assert "Recovery suggestions:" in formatted
        assert "1. Lower learning rate: Reduce --lr" in formatted
        assert "2. Clip inputs: Scale x" in formatted

    @pytest.mark.parametrize(
        "error, code",
        [
            (UsageError("bad flag"), EXIT_USAGE),
            (ConfigError("bad value", key="lr"), EXIT_USAGE),
            (PreconditionError("too early"), EXIT_USAGE),
            (UntrainedModelError("fresh model"), EXIT_USAGE),
            (DataError("unreadable"), EXIT_DATA),
            (BadMagicError("not a feature file"), EXIT_DATA),
            (LabelRangeError("label 9", video_id="v"), EXIT_DATA),
            (MissingPseudoTrackError("no track", video_id="v"), EXIT_DATA),
            (MetricUndefinedError("one class"), EXIT_DATA),
            (NonFiniteError("nan"), EXIT_NUMERIC),
            (ShapeMismatchError("(2, 3) vs (3, 2)"), EXIT_NUMERIC),
            (ZeroNormError("zero prompt"), EXIT_NUMERIC),
        ],
    )
    def test_exit_codes(self, error, code):
        """Test each error family maps to its process exit status."""
        assert error.exit_code == code

    def test_usage_error_names_flag(self):
        """Test a usage error with a flag suggests passing it."""
        error = UsageError("Stage 2 needs tracks", flag="--pseudo-dir")

        assert error.flag == "--pseudo-dir"
        assert "--pseudo-dir" in error.get_formatted_message()
        assert error.severity == ErrorSeverity.LOW

    def test_default_suggestions(self):
        """Test errors with a standard remedy carry it by default."""
        assert ConfigError("x").recovery_suggestions[0].action == "Fix config"
        assert UntrainedModelError("x").recovery_suggestions[0].action == (
            "Train stage 1"
        )
        assert MissingPseudoTrackError("x").recovery_suggestions
        assert NonFiniteError("x").recovery_suggestions[0].action == (
            "Lower learning rate"
        )

    def test_severity_defaults(self):
        """Test data errors are high severity and numeric errors critical."""
        assert DataError("x").severity == ErrorSeverity.HIGH
        assert ZeroNormError("x").severity == ErrorSeverity.CRITICAL


class TestErrorHandler:
    """Test the ErrorHandler class."""

    def setup_method(self):
        """Set up test fixtures."""
        self.logger = Mock()
        self.error_handler = ErrorHandler(self.logger)

    def test_initialization(self):
        """Test ErrorHandler initialization."""
        assert self.error_handler.logger == self.logger
        assert self.error_handler.get_error_history() == []

    def test_handle_data_error(self):
        """Test handling data errors."""
        error = self.error_handler.handle_data_error(
            "Manifest not found", path="m.tsv", context={"line": 3}
        )

        assert isinstance(error, DataError)
        assert error.path == "m.tsv"
        self.logger.error.assert_called_once()
        self.logger.debug.assert_called_once()
        assert error in self.error_handler.get_error_history()

    def test_handle_non_finite(self):
        """Test non-finite failures name the op, epoch and batch."""
        error = self.error_handler.handle_non_finite("log", epoch=4, batch=2)

        assert isinstance(error, NonFiniteError)
        assert error.op == "log"
        assert "'log' at epoch 4, batch 2" in error.message
        assert error.context["epoch"] == 4
        self.logger.critical.assert_called_once()

    def test_handle_non_finite_outside_training(self):
        """Test the message omits the position when none is given."""
        error = self.error_handler.handle_non_finite("div")
        assert error.message == "Non-finite value produced by 'div'"

    def test_severity_selects_log_method(self):
        """Test low-severity errors are logged at info level."""
        self.error_handler.record(UsageError("bad flag"))

        self.logger.info.assert_called_once()
        _, kwargs = self.logger.info.call_args
        assert kwargs["error_type"] == "UsageError"
        assert kwargs["exit_code"] == EXIT_USAGE

    def test_history_is_a_copy(self):
        """Test callers cannot change the stored history."""
        error1 = self.error_handler.handle_data_error("bad manifest")
        error2 = self.error_handler.handle_non_finite("exp")

        history = self.error_handler.get_error_history()
        assert history == [error1, error2]

        history.clear()
        assert len(self.error_handler.get_error_history()) == 2

        self.error_handler.clear_error_history()
        assert len(self.error_handler.get_error_history()) == 0

    def test_error_context_passes_results(self):
        """Test a clean block records nothing."""
        with self.error_handler.error_context("train", stage=1):
            losses = [0.7, 0.6]

        assert losses == [0.7, 0.6]
        assert len(self.error_handler.get_error_history()) == 0

    def test_error_context_manager_custom_exception(self):
        """Test toolkit errors are re-raised unchanged and recorded once."""
        custom_error = ConfigError("Custom config error", key="n")

        with pytest.raises(ConfigError) as exc_info:
            with self.error_handler.error_context("test_operation"):
                raise custom_error

        assert exc_info.value is custom_error
        assert self.error_handler.get_error_history() == [custom_error]

    def test_error_context_manager_generic_exception(self):
        """Test error context manager with generic exception."""
        with pytest.raises(CrossLabelError) as exc_info:
            with self.error_handler.error_context("eval", video="vid_3"):
                raise ValueError("math domain error")

        error = exc_info.value
        assert "Unexpected error during eval" in error.message
        assert error.context["operation"] == "eval"
        assert error.context["video"] == "vid_3"
        assert "math domain error" in error.context["original_exception"]
        assert isinstance(error.__cause__, ValueError)
        assert error.exit_code == EXIT_DATA

    def test_traceback_is_not_logged(self):
        """Test the stored traceback stays out of the debug log event."""
        with pytest.raises(CrossLabelError):
            with self.error_handler.error_context("op"):
                raise RuntimeError("boom")

        _, kwargs = self.logger.debug.call_args
        assert "traceback" not in kwargs
        assert kwargs["operation"] == "op"

    def test_global_handler_replacement(self):
        """Test the process-wide handler can be swapped."""
        original = get_error_handler()
        try:
            set_error_handler(self.error_handler)
            assert get_error_handler() is self.error_handler
        finally:
            set_error_handler(original)
