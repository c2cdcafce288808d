"""Segment proposals from inference scores and GT segments from frame labels."""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..car.models import find_runs
from ..exceptions import ShapeMismatchError
from ..training.inference import InferenceResult


@dataclass(frozen=True)
class Segment:
    """A half-open snippet interval carrying an abnormal category."""

    start: int
    end: int
    category: int
    confidence: float = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ShapeMismatchError(
                f"Segment needs 0 <= start < end, got [{self.start}, {self.end})",
                op="segment",
            )
        if self.category < 1:
            raise ShapeMismatchError(
                f"Segment category must be abnormal (>= 1), got {self.category}",
                op="segment",
            )

    @property
    def span(self) -> Tuple[int, int]:
        return (self.start, self.end)

    @property
    def length(self) -> int:
        return self.end - self.start


def extract_segments(
    result: InferenceResult, thresholds: Sequence[float]
) -> List[Segment]:
    """Multi-threshold proposals; identical span and category keep the best score.

    A run of ``S_ab > threshold`` becomes a segment labeled with the abnormal
    category of highest mean ``S_cls`` and scored by the mean ``S_ab``.
    """
    s_ab = np.asarray(result.s_ab, dtype=np.float64)
    s_cls = np.asarray(result.s_cls, dtype=np.float64)
    if s_cls.ndim != 2 or s_cls.shape[0] != s_ab.shape[0] or s_cls.shape[1] < 2:
        raise ShapeMismatchError(
            f"Score shapes {s_ab.shape} and {s_cls.shape} do not match",
            op="extract_segments",
        )
    best: Dict[Tuple[int, int, int], float] = {}
    for threshold in sorted(thresholds):
        for start, end in find_runs(s_ab > threshold):
            category = 1 + int(np.argmax(s_cls[start:end, 1:].mean(axis=0)))
            confidence = float(s_ab[start:end].mean())
            key = (start, end, category)
            if confidence > best.get(key, -1.0):
                best[key] = confidence
    return [
        Segment(start, end, category, confidence)
        for (start, end, category), confidence in sorted(best.items())
    ]


def gt_segments(gt_frames: np.ndarray) -> List[Segment]:
    """Maximal runs of one abnormal category in a frame-label vector."""
    gt = np.asarray(gt_frames)
    segments = []
    for category in np.unique(gt[gt > 0]):
        for start, end in find_runs(gt == category):
            segments.append(Segment(start, end, int(category)))
    return sorted(segments, key=lambda seg: (seg.start, seg.category))
