"""Training progress monitoring and the per-epoch loss log."""

import time
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import structlog

LOSS_KEYS = ("bce", "nce", "focal", "total")
LOG_COLUMNS = ("epoch",) + tuple(f"L_{key}" for key in LOSS_KEYS)


@dataclass
class EpochSummary:
    """Mean loss terms over the batches of one epoch."""

    epoch: int
    bce: float
    nce: float
    focal: float
    total: float

    def as_row(self) -> str:
        values = (self.bce, self.nce, self.focal, self.total)
        return "\t".join([str(self.epoch)] + [f"{v:.9g}" for v in values])


@dataclass
class TrainingMetrics:
    """Running counters for one training stage."""

    stage: int = 1
    start_time: datetime = field(default_factory=datetime.now)
    batches: int = 0
    videos: int = 0
    non_finite_events: int = 0
    epochs: List[EpochSummary] = field(default_factory=list)
    recent_errors: List[str] = field(default_factory=list)

    def get_elapsed(self) -> timedelta:
        return datetime.now() - self.start_time

    def add_error(self, error: str) -> None:
        self.recent_errors.append(f"{datetime.now().isoformat()}: {error}")
        # Keep only last 10 errors
        if len(self.recent_errors) > 10:
            self.recent_errors.pop(0)


class TrainingMonitor:
    """Collects batch losses, rolls them into epochs and writes the TSV log."""

    def __init__(self, stage: int = 1, log_path: Optional[Path] = None):
        self.logger = structlog.get_logger(__name__)
        self.metrics = TrainingMetrics(stage=stage)
        self.log_path = Path(log_path) if log_path else None
        self._batch_losses: List[Dict[str, float]] = []
        self._batch_times: List[float] = []
        self._batch_started: Optional[float] = None

        if self.log_path is not None:
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            self.log_path.write_text("\t".join(LOG_COLUMNS) + "\n", encoding="utf-8")

    def start_batch(self) -> None:
        self._batch_started = time.perf_counter()

    def record_batch(self, losses: List[Dict[str, float]]) -> None:
        """Record the per-video loss terms of one finished batch."""
        if self._batch_started is not None:
            self._batch_times.append(time.perf_counter() - self._batch_started)
            self._batch_started = None
        self.metrics.batches += 1
        self.metrics.videos += len(losses)
        self._batch_losses.extend(losses)

    def record_non_finite(self, message: str) -> None:
        self.metrics.non_finite_events += 1
        self.metrics.add_error(message)
        self.logger.warning("non_finite_recorded", error=message)

    def end_epoch(self, epoch: int) -> EpochSummary:
        """Average this epoch's losses, append the TSV row and reset."""
        losses = self._batch_losses or [dict.fromkeys(LOSS_KEYS, 0.0)]
        summary = EpochSummary(
            epoch=epoch,
            **{
                key: float(np.mean([entry[key] for entry in losses]))
                for key in LOSS_KEYS
            },
        )
        self.metrics.epochs.append(summary)
        self._batch_losses = []
        if self.log_path is not None:
            with self.log_path.open("a", encoding="utf-8") as handle:
                handle.write(summary.as_row() + "\n")
        self.logger.info(
            "epoch_finished",
            stage=self.metrics.stage,
            epoch=epoch,
            L_bce=summary.bce,
            L_nce=summary.nce,
            L_focal=summary.focal,
            L_total=summary.total,
        )
        return summary

    def get_training_report(self) -> Dict[str, Any]:
        epochs = self.metrics.epochs
        return {
            "stage": self.metrics.stage,
            "epochs": len(epochs),
            "batches": self.metrics.batches,
            "first_total_loss": epochs[0].total if epochs else None,
            "last_total_loss": epochs[-1].total if epochs else None,
            "mean_batch_time_ms": float(np.mean(self._batch_times)) * 1000
            if self._batch_times
            else 0.0,
            "elapsed_seconds": self.metrics.get_elapsed().total_seconds(),
            "non_finite_events": self.metrics.non_finite_events,
            "recent_errors": self.metrics.recent_errors[-5:],
        }
