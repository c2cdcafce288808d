"""End-to-end runs: the two-stage pipeline and the pseudo-label ablation."""

from .ablation import AblationRow, AblationSpec, run_ablation
from .pipeline import PipelineResult, load_model, run_pipeline

__all__ = [
    "AblationRow",
    "AblationSpec",
    "run_ablation",
    "PipelineResult",
    "load_model",
    "run_pipeline",
]
