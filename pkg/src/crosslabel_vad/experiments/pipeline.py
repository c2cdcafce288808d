"""The two-stage run: train, generate pseudo tracks, retrain, evaluate, report.

Run directory layout::

    config.resolved          flat key = value settings of the run
    stage1.ckpt              pseudo-label generator
    train_stage1.log.tsv
    report_stage1.tsv
    pseudo/<video_id>.tsv    pseudo_b and pseudo_c per snippet
    stage2.ckpt              final model
    train_stage2.log.tsv
    report.tsv
    scores/<video_id>.tsv    S_ab and S_cls per snippet
    summary.md
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import structlog

from ..car.pseudo import generate_dataset_tracks
from ..config import TrainConfig, dump_flat_config
from ..dataio.models import Dataset, FeatureSequence
from ..exceptions import ConfigError, DataError
from ..evaluation.report import EvalReport, evaluate, write_report
from ..evaluation.templates import TemplateType, get_report_templates
from ..model.network import CrossLabelModel
from ..training.inference import write_scores
from ..training.trainer import TrainResult, checkpoint_name, train_stage

logger = structlog.get_logger(__name__)

CONFIG_FILE = "config.resolved"
PSEUDO_DIR = "pseudo"
SCORES_DIR = "scores"
REPORT_FILE = "report.tsv"
STAGE1_REPORT_FILE = "report_stage1.tsv"
SUMMARY_FILE = "summary.md"


@dataclass
class PipelineResult:
    run_dir: Path
    stage1: TrainResult
    stage2: TrainResult
    report_stage1: EvalReport
    report: EvalReport
    pseudo_quality: Dict[str, Optional[float]] = field(default_factory=dict)


def stage_config(cfg: TrainConfig, stage: int) -> TrainConfig:
    return cfg.model_copy(update={"stage": stage})


def write_resolved_config(run_dir: Path, cfg: TrainConfig) -> Path:
    path = run_dir / CONFIG_FILE
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        path.write_text(dump_flat_config(cfg), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e}", path=str(path)) from e
    return path


def load_model(path: Union[str, Path], cfg: TrainConfig) -> CrossLabelModel:
    """Load a checkpoint and check it against the pyramid depth in ``cfg``."""
    model = CrossLabelModel.load(Path(path))
    if model.levels != cfg.levels:
        raise ConfigError(
            f"Checkpoint {path} has {model.levels} levels but levels={cfg.levels}",
            key="levels",
        )
    return model


def evaluate_to_dir(
    model: CrossLabelModel,
    videos: Sequence[FeatureSequence],
    cfg: TrainConfig,
    out_dir: Path,
    report_name: str = REPORT_FILE,
    write_video_scores: bool = True,
) -> EvalReport:
    """Evaluate and persist the report, plus per-video scores when asked."""
    report, results = evaluate(model, videos, cfg)
    write_report(out_dir / report_name, report)
    if write_video_scores:
        names = videos.category_names if isinstance(videos, Dataset) else None
        for result in results:
            write_scores(out_dir / SCORES_DIR, result, names)
    return report


def summary_context(
    cfg: TrainConfig,
    first: EvalReport,
    second: EvalReport,
    pseudo_quality: Dict[str, Optional[float]],
    category_names: Optional[Dict[int, str]] = None,
) -> Dict[str, Any]:
    """Template variables for ``summary.md``."""
    names = category_names or {}
    ious = list(second.category_ap)
    categories = sorted({c for aps in second.category_ap.values() for c in aps})
    return {
        "metrics": [
            ("frame AP", first.frame_ap, second.frame_ap),
            ("frame AUC", first.frame_auc, second.frame_auc),
            ("avg mAP", first.map_avg, second.map_avg),
        ],
        "map_by_iou": [(f"{iou:g}", v) for iou, v in second.map_by_iou.items()],
        "iou_columns": [f"{iou:g}" for iou in ious],
        "category_ap": [
            (
                names.get(c, f"category_{c}"),
                [second.category_ap[iou].get(c, 0.0) for iou in ious],
            )
            for c in categories
        ],
        "pseudo_quality": sorted(pseudo_quality.items()),
        "fingerprint": second.fingerprint,
        "config_text": dump_flat_config(cfg),
    }


def run_pipeline(
    dataset: Dataset,
    cfg: TrainConfig,
    run_dir: Union[str, Path],
    eval_dataset: Optional[Dataset] = None,
) -> PipelineResult:
    """Both stages end to end; evaluation defaults to the training videos."""
    run_dir = Path(run_dir)
    eval_videos = eval_dataset if eval_dataset is not None else dataset
    write_resolved_config(run_dir, stage_config(cfg, 2))
    logger.info("pipeline_started", run_dir=str(run_dir), videos=len(dataset))

    cfg1 = stage_config(cfg, 1)
    stage1 = train_stage(dataset, cfg1, out_dir=run_dir)
    report_stage1 = evaluate_to_dir(
        stage1.model,
        eval_videos,
        cfg1,
        run_dir,
        report_name=STAGE1_REPORT_FILE,
        write_video_scores=False,
    )

    pseudo_dir = run_dir / PSEUDO_DIR
    pseudo_quality = generate_dataset_tracks(stage1.model, dataset, cfg1, pseudo_dir)

    cfg2 = stage_config(cfg, 2)
    stage2 = train_stage(dataset, cfg2, out_dir=run_dir, pseudo_dir=pseudo_dir)
    report = evaluate_to_dir(stage2.model, eval_videos, cfg2, run_dir)

    context = summary_context(
        cfg2, report_stage1, report, pseudo_quality, dataset.category_names
    )
    get_report_templates().render_to(
        TemplateType.SUMMARY, run_dir / SUMMARY_FILE, context
    )
    logger.info(
        "pipeline_finished",
        run_dir=str(run_dir),
        checkpoint=checkpoint_name(2),
        stage1_frame_ap=round(report_stage1.frame_ap, 6),
        frame_ap=round(report.frame_ap, 6),
    )
    return PipelineResult(
        run_dir=run_dir,
        stage1=stage1,
        stage2=stage2,
        report_stage1=report_stage1,
        report=report,
        pseudo_quality=pseudo_quality,
    )
