"""Pseudo-track generation from a trained stage-1 model and TSV persistence."""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import structlog

from ..config import TrainConfig
from ..dataio.models import FeatureSequence
from ..exceptions import DataError, MissingPseudoTrackError
from ..model.network import CrossLabelModel
from ..model.pyramid import resample_labels, resample_to_n
from .models import Branch, PseudoTrack
from .refine import (
    aggregate_scales,
    mean_scales,
    normalize_and_upsample,
    temporal_refine,
)

logger = structlog.get_logger(__name__)

TrackPair = Tuple[PseudoTrack, PseudoTrack]
TSV_HEADER = "snippet_index\tpseudo_b\tpseudo_c"


def tracks_from_levels(
    b_levels: Iterable[np.ndarray],
    c_levels: Iterable[np.ndarray],
    cfg: TrainConfig,
    video_id: str = "",
) -> TrackPair:
    """Turn per-level branch logits into the two pseudo tracks.

    With ``cfg.car`` the scales are RBF-fused and temporally refined; without
    it the plain scale mean is used as a soft track.
    """
    b_rows = normalize_and_upsample(list(b_levels), Branch.B, cfg.n)
    c_rows = normalize_and_upsample(list(c_levels), Branch.C, cfg.n)
    if not cfg.car:
        return (
            PseudoTrack(video_id, Branch.B, np.clip(mean_scales(b_rows), 0.0, 1.0)),
            PseudoTrack(video_id, Branch.C, np.clip(mean_scales(c_rows), 0.0, 1.0)),
        )
    if b_rows.shape[0] == 1:
        b_fused, c_fused = b_rows[0], c_rows[0]
    else:
        b_fused = aggregate_scales(b_rows, cfg.refine)
        c_fused = aggregate_scales(c_rows, cfg.refine)
    return (
        temporal_refine(b_fused, cfg.refine, video_id, Branch.B),
        temporal_refine(c_fused, cfg.refine, video_id, Branch.C),
    )


def generate_pseudo_tracks(
    model: CrossLabelModel, video: FeatureSequence, cfg: TrainConfig
) -> TrackPair:
    """``(pseudo_b, pseudo_c)`` for one video; normal-only videos get zeros."""
    model.require_trained()
    if video.is_normal:
        return (
            PseudoTrack.zeros(video.video_id, Branch.B, cfg.n),
            PseudoTrack.zeros(video.video_id, Branch.C, cfg.n),
        )
    features = resample_to_n(video.features, cfg.n, cfg.levels)
    outputs = model.predict(features.astype(model.params["enc.proj.w"].values.dtype))
    b_pyramid, c_pyramid = outputs.to_pyramids()
    return tracks_from_levels(b_pyramid.levels, c_pyramid.levels, cfg, video.video_id)


def skeleton_iou(
    track: PseudoTrack, gt_frames: Optional[np.ndarray]
) -> Optional[float]:
    """Snippet IoU of the full-strength part of a track with resampled GT."""
    if gt_frames is None:
        return None
    truth = resample_labels(gt_frames, track.n) > 0
    pred = track.skeleton
    union = np.logical_or(truth, pred).sum()
    if union == 0:
        return None
    return float(np.logical_and(truth, pred).sum() / union)


# ---------------------------------------------------------------------------
# Persistence


def pseudo_path(pseudo_dir: Union[str, Path], video_id: str) -> Path:
    return Path(pseudo_dir) / f"{video_id}.tsv"


def write_pseudo_tracks(
    pseudo_dir: Union[str, Path], pseudo_b: PseudoTrack, pseudo_c: PseudoTrack
) -> Path:
    path = pseudo_path(pseudo_dir, pseudo_b.video_id)
    lines = [TSV_HEADER] + [
        f"{t}\t{b:.17g}\t{c:.17g}"
        for t, (b, c) in enumerate(zip(pseudo_b.values, pseudo_c.values))
    ]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write pseudo track {path}: {e}", path=str(path)) from e
    return path


def read_pseudo_tracks(
    pseudo_dir: Union[str, Path], video_id: str, n: Optional[int] = None
) -> TrackPair:
    path = pseudo_path(pseudo_dir, video_id)
    if not path.is_file():
        raise MissingPseudoTrackError(
            f"No pseudo track for video '{video_id}' in {pseudo_dir}",
            video_id=video_id,
            path=str(path),
        )
    rows = [
        line.split("\t")
        for line in path.read_text(encoding="utf-8").splitlines()[1:]
        if line.strip()
    ]
    try:
        values = np.array([[float(b), float(c)] for _, b, c in rows], dtype=np.float64)
    except ValueError as e:
        raise DataError(f"{path}: malformed pseudo track row", path=str(path)) from e
    if n is not None and values.shape[0] != n:
        raise MissingPseudoTrackError(
            f"Pseudo track for '{video_id}' has {values.shape[0]} snippets, "
            f"expected {n}",
            video_id=video_id,
            path=str(path),
        )
    values = values.reshape(-1, 2)
    return (
        PseudoTrack(video_id, Branch.B, values[:, 0]),
        PseudoTrack(video_id, Branch.C, values[:, 1]),
    )


def load_pseudo_dir(
    pseudo_dir: Union[str, Path], video_ids: Iterable[str], n: int
) -> Dict[str, TrackPair]:
    return {vid: read_pseudo_tracks(pseudo_dir, vid, n) for vid in video_ids}


def generate_dataset_tracks(
    model: CrossLabelModel,
    videos: Iterable[FeatureSequence],
    cfg: TrainConfig,
    pseudo_dir: Union[str, Path],
) -> Dict[str, Optional[float]]:
    """Write tracks for every video and return mean skeleton IoU per branch."""
    ious: Dict[str, List[float]] = {"pseudo_b_iou": [], "pseudo_c_iou": []}
    count = 0
    for video in videos:
        pseudo_b, pseudo_c = generate_pseudo_tracks(model, video, cfg)
        write_pseudo_tracks(pseudo_dir, pseudo_b, pseudo_c)
        count += 1
        if video.is_normal:
            continue
        for key, track in (("pseudo_b_iou", pseudo_b), ("pseudo_c_iou", pseudo_c)):
            iou = skeleton_iou(track, video.gt_frames)
            if iou is not None:
                ious[key].append(iou)
    quality = {
        key: float(np.mean(values)) if values else None for key, values in ious.items()
    }
    logger.info(
        "pseudo_tracks_written", pseudo_dir=str(pseudo_dir), videos=count, **quality
    )
    return quality
