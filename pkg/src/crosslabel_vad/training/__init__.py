"""Losses, the per-stage trainer and multi-scale inference."""

from .inference import (
    InferenceResult,
    aggregate_inference,
    combine_levels,
    infer_dataset,
    write_scores,
)
from .losses import (
    LossBreakdown,
    bce_video_loss,
    focal_soft_loss,
    mil_align_loss,
    topk_mean,
    total_loss,
    video_loss,
)
from .trainer import TrainResult, balanced_order, checkpoint_name, log_name, train_stage

__all__ = [
    "InferenceResult",
    "aggregate_inference",
    "combine_levels",
    "infer_dataset",
    "write_scores",
    "LossBreakdown",
    "bce_video_loss",
    "focal_soft_loss",
    "mil_align_loss",
    "topk_mean",
    "total_loss",
    "video_loss",
    "TrainResult",
    "balanced_order",
    "checkpoint_name",
    "log_name",
    "train_stage",
]
