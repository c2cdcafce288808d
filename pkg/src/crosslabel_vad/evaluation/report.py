"""Evaluation of a trained model against snippet-level ground truth."""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import structlog

from ..config import TrainConfig, evaluation_fingerprint
from ..dataio.models import FeatureSequence
from ..exceptions import DataError, MetricUndefinedError, MissingFileError
from ..model.network import CrossLabelModel
from ..model.pyramid import resample_labels
from ..training.inference import InferenceResult, infer_dataset
from .metrics import category_ap_at_iou, frame_ap, frame_auc
from .segments import Segment, extract_segments, gt_segments

logger = structlog.get_logger(__name__)


@dataclass
class EvalReport:
    """Coarse- and fine-grained metrics of one evaluated model."""

    frame_ap: float
    frame_auc: float
    map_by_iou: Dict[float, float]
    category_ap: Dict[float, Dict[int, float]]
    fingerprint: str

    @property
    def map_avg(self) -> float:
        return float(np.mean(list(self.map_by_iou.values())))

    def rows(self) -> List[Tuple[str, str]]:
        """``(metric, value)`` rows in report order."""
        rows = [
            ("frame_ap", f"{self.frame_ap:.9g}"),
            ("frame_auc", f"{self.frame_auc:.9g}"),
        ]
        rows += [(f"mAP@{iou:g}", f"{v:.9g}") for iou, v in self.map_by_iou.items()]
        rows.append(("map_avg", f"{self.map_avg:.9g}"))
        for iou, per_category in self.category_ap.items():
            rows += [
                (f"category_{cat}_AP@{iou:g}", f"{ap:.9g}")
                for cat, ap in per_category.items()
            ]
        rows.append(("config_fingerprint", self.fingerprint))
        return rows

    def to_tsv(self) -> str:
        return "metric\tvalue\n" + "".join(f"{k}\t{v}\n" for k, v in self.rows())


def frame_labels(video: FeatureSequence, n: int) -> np.ndarray:
    """Binary snippet labels at length ``n``; normal videos without GT are zeros."""
    if video.gt_frames is None:
        if not video.is_normal:
            raise MetricUndefinedError(
                f"Abnormal video '{video.video_id}' has no ground-truth frames"
            )
        return np.zeros(n, dtype=np.int64)
    return (resample_labels(video.gt_frames, n) > 0).astype(np.int64)


def evaluate_results(
    videos: Sequence[FeatureSequence],
    results: Sequence[InferenceResult],
    cfg: TrainConfig,
) -> EvalReport:
    """Score precomputed inference results; ``results`` align with ``videos``."""
    scores: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    predictions: Dict[str, List[Segment]] = {}
    ground_truth: Dict[str, List[Segment]] = {}
    for video, result in zip(videos, results):
        scores.append(result.s_ab)
        labels.append(frame_labels(video, result.n))
        predictions[video.video_id] = extract_segments(
            result, cfg.evaluation.thresholds
        )
        if video.gt_frames is not None:
            ground_truth[video.video_id] = gt_segments(
                resample_labels(video.gt_frames, result.n)
            )

    s, y = np.concatenate(scores), np.concatenate(labels)
    category_ap = category_ap_at_iou(
        predictions, ground_truth, cfg.evaluation.iou_thresholds
    )
    return EvalReport(
        frame_ap=frame_ap(s, y),
        frame_auc=frame_auc(s, y),
        map_by_iou={
            iou: float(np.mean(list(aps.values()))) for iou, aps in category_ap.items()
        },
        category_ap=category_ap,
        fingerprint=evaluation_fingerprint(cfg),
    )


def evaluate(
    model: CrossLabelModel, videos: Sequence[FeatureSequence], cfg: TrainConfig
) -> Tuple[EvalReport, List[InferenceResult]]:
    """Run inference over ``videos`` and compute the full report."""
    model.require_trained()
    results = infer_dataset(model, videos, cfg.n)
    report = evaluate_results(videos, results, cfg)
    logger.info(
        "evaluation_finished",
        videos=len(results),
        frame_ap=round(report.frame_ap, 6),
        frame_auc=round(report.frame_auc, 6),
        map_avg=round(report.map_avg, 6),
    )
    return report, results


def write_report(path: Union[str, Path], report: EvalReport) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.to_tsv(), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write report {path}: {e}", path=str(path)) from e
    return path


def read_report(path: Union[str, Path]) -> Dict[str, str]:
    """Metric name to raw value from a ``report.tsv`` file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Report not found: {path}", path=str(path))
    lines = path.read_text(encoding="utf-8").splitlines()[1:]
    return dict(line.split("\t", 1) for line in lines if line.strip())
