"""Cross pseudo labeling with consistency-aware refinement."""

from .models import Branch, PseudoTrack, find_runs
from .pseudo import (
    generate_dataset_tracks,
    generate_pseudo_tracks,
    load_pseudo_dir,
    read_pseudo_tracks,
    skeleton_iou,
    write_pseudo_tracks,
)
from .refine import (
    abnormal_track,
    aggregate_scales,
    mad_bandwidth,
    normalize_and_upsample,
    rbf_weights,
    temporal_refine,
)

__all__ = [
    "Branch",
    "PseudoTrack",
    "find_runs",
    "generate_dataset_tracks",
    "generate_pseudo_tracks",
    "load_pseudo_dir",
    "read_pseudo_tracks",
    "skeleton_iou",
    "write_pseudo_tracks",
    "abnormal_track",
    "aggregate_scales",
    "mad_bandwidth",
    "normalize_and_upsample",
    "rbf_weights",
    "temporal_refine",
]
