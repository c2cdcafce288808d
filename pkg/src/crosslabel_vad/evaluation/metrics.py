"""Ranking metrics: frame AP, frame AUC and segment mAP at temporal IoU."""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from scipy import stats

from ..exceptions import MetricUndefinedError, ShapeMismatchError
from .segments import Segment


def _step_ap(scores: np.ndarray, hits: np.ndarray, num_positives: int) -> float:
    """Step-interpolated AP over a ranking; tied scores form one block.

    Each block contributes its recall increment times the precision measured
    at the end of the block.
    """
    if scores.size == 0:
        return 0.0
    order = np.argsort(-scores, kind="stable")
    ranked = scores[order]
    cum_hits = np.cumsum(hits[order].astype(np.float64))
    ends = np.append(np.flatnonzero(ranked[1:] != ranked[:-1]) + 1, ranked.size)
    tp = cum_hits[ends - 1]
    gained = np.diff(tp, prepend=0.0)
    return float(np.sum(gained * (tp / ends)) / num_positives)


def _binary_inputs(
    scores: Sequence[float], labels: Sequence[int]
) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise ShapeMismatchError(f"{s.size} scores but {y.size} labels", op="metrics")
    return s, y


def frame_ap(scores: Sequence[float], labels: Sequence[int]) -> float:
    s, y = _binary_inputs(scores, labels)
    positives = int(y.sum())
    if positives == 0:
        raise MetricUndefinedError("Frame AP is undefined without positive labels")
    return _step_ap(s, y, positives)


def frame_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC; ties count half."""
    s, y = _binary_inputs(scores, labels)
    positives = int(y.sum())
    negatives = y.size - positives
    if positives == 0 or negatives == 0:
        raise MetricUndefinedError("Frame AUC needs both positive and negative labels")
    ranks = stats.rankdata(s)
    u = ranks[y].sum() - positives * (positives + 1) / 2.0
    return float(u / (positives * negatives))


def temporal_iou(a: Tuple[int, int], b: Tuple[int, int]) -> float:
    """IoU of half-open intervals ``[start, end)``."""
    overlap = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - overlap
    return overlap / union if union > 0 else 0.0


def category_ap_at_iou(
    predictions: Mapping[str, Iterable[Segment]],
    ground_truth: Mapping[str, Iterable[Segment]],
    iou_thresholds: Sequence[float],
) -> Dict[float, Dict[int, float]]:
    """AP per GT category and IoU threshold, with greedy one-to-one matching."""
    gt_by_cat: Dict[int, List[Tuple[str, Segment]]] = {}
    for vid, segs in ground_truth.items():
        for seg in segs:
            gt_by_cat.setdefault(seg.category, []).append((vid, seg))
    if not gt_by_cat:
        raise MetricUndefinedError("mAP is undefined without ground-truth segments")

    preds_by_cat: Dict[int, List[Tuple[str, Segment]]] = {}
    for vid in sorted(predictions):
        for seg in predictions[vid]:
            preds_by_cat.setdefault(seg.category, []).append((vid, seg))

    table: Dict[float, Dict[int, float]] = {}
    for threshold in iou_thresholds:
        per_category: Dict[int, float] = {}
        for category in sorted(gt_by_cat):
            gts = gt_by_cat[category]
            preds = preds_by_cat.get(category, [])
            confidence = np.array([s.confidence for _, s in preds], dtype=np.float64)
            order = np.argsort(-confidence, kind="stable")
            matched: Set[int] = set()
            hits = np.zeros(len(preds), dtype=bool)
            for rank in order:
                vid, pred = preds[rank]
                best: Optional[int] = None
                best_iou = 0.0
                for j, (gt_vid, gt) in enumerate(gts):
                    if gt_vid != vid or j in matched:
                        continue
                    iou = temporal_iou(pred.span, gt.span)
                    if iou >= threshold and (best is None or iou > best_iou):
                        best, best_iou = j, iou
                if best is not None:
                    matched.add(best)
                    hits[rank] = True
            per_category[category] = _step_ap(confidence, hits, len(gts))
        table[threshold] = per_category
    return table


def map_at_iou(
    predictions: Mapping[str, Iterable[Segment]],
    ground_truth: Mapping[str, Iterable[Segment]],
    iou_thresholds: Sequence[float],
) -> Dict[float, float]:
    """mAP per IoU threshold, averaged over the categories present in GT."""
    table = category_ap_at_iou(predictions, ground_truth, iou_thresholds)
    return {iou: float(np.mean(list(aps.values()))) for iou, aps in table.items()}
