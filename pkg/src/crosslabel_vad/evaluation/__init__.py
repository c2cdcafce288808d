"""Coarse- and fine-grained evaluation and report rendering."""

from .metrics import category_ap_at_iou, frame_ap, frame_auc, map_at_iou, temporal_iou
from .report import (
    EvalReport,
    evaluate,
    evaluate_results,
    frame_labels,
    read_report,
    write_report,
)
from .segments import Segment, extract_segments, gt_segments
from .templates import ReportTemplates, TemplateType, get_report_templates

__all__ = [
    "category_ap_at_iou",
    "frame_ap",
    "frame_auc",
    "map_at_iou",
    "temporal_iou",
    "EvalReport",
    "evaluate",
    "evaluate_results",
    "frame_labels",
    "read_report",
    "write_report",
    "Segment",
    "extract_segments",
    "gt_segments",
    "ReportTemplates",
    "TemplateType",
    "get_report_templates",
]
