"""Consistency-aware refinement of multi-scale scores into pseudo tracks.

Scales are fused per snippet with RBF weights whose bandwidth follows the
median absolute deviation of that snippet's scale column. The fused score is
then binarized, nearby runs are merged, short runs dropped, and the survivors
rendered as plateaus with Gaussian tapers.
"""

from typing import List, Sequence

import numpy as np
from scipy import special

from ..config import RefineConfig
from ..exceptions import ShapeMismatchError
from ..model.pyramid import interpolation_matrix
from .models import Branch, PseudoTrack, Run, find_runs


def abnormal_track(category_logits: np.ndarray) -> np.ndarray:
    """``1 - softmax_normal`` per snippet for a ``t x M`` logit matrix."""
    logits = np.asarray(category_logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[1] < 2:
        raise ShapeMismatchError(
            f"Category logits must be t x M with M >= 2, got {logits.shape}",
            op="abnormal_track",
        )
    return 1.0 - special.softmax(logits, axis=1)[:, 0]


def normalize_and_upsample(
    levels: Sequence[np.ndarray], branch: Branch, n: int
) -> np.ndarray:
    """Normalize each level to [0, 1] and interpolate it to ``n``; ``L x n``."""
    rows = []
    for level in levels:
        level = np.asarray(level, dtype=np.float64)
        if branch is Branch.B:
            probs = special.expit(level.reshape(-1))
        else:
            probs = abnormal_track(level)
        rows.append(interpolation_matrix(n, probs.shape[0]) @ probs)
    return np.clip(np.vstack(rows), 0.0, 1.0)


def mad_bandwidth(x: np.ndarray, scale: float = 1.4826, floor: float = 1e-6) -> float:
    x = np.asarray(x, dtype=np.float64)
    mad = np.median(np.abs(x - np.median(x)))
    return float(max(scale * mad, floor))


def rbf_weights(x: np.ndarray, sigma: float) -> np.ndarray:
    """Normalized leave-one-out RBF affinity of each scale to the others."""
    x = np.asarray(x, dtype=np.float64)
    diff = x[:, None] - x[None, :]
    affinity = np.exp(-(diff**2) / (2.0 * sigma**2))
    np.fill_diagonal(affinity, 0.0)
    support = affinity.sum(axis=1)
    total = support.sum()
    if total <= 0.0:
        return np.full(x.shape[0], 1.0 / x.shape[0])
    return support / total


def _column_bandwidths(tracks: np.ndarray, cfg: RefineConfig) -> np.ndarray:
    mad = np.median(np.abs(tracks - np.median(tracks, axis=0)), axis=0)
    return np.maximum(cfg.mad_scale * mad, cfg.sigma_floor)


def aggregate_scales(tracks: np.ndarray, cfg: RefineConfig) -> np.ndarray:
    """RBF-weighted fusion of an ``L x n`` matrix into a length-``n`` vector."""
    tracks = np.asarray(tracks, dtype=np.float64)
    if tracks.ndim != 2 or tracks.shape[0] < 2:
        raise ShapeMismatchError(
            f"Need an L x n matrix with L >= 2, got {tracks.shape}",
            op="aggregate_scales",
        )
    sigma = _column_bandwidths(tracks, cfg)
    diff = tracks[:, None, :] - tracks[None, :, :]
    affinity = np.exp(-(diff**2) / (2.0 * sigma**2))
    idx = np.arange(tracks.shape[0])
    affinity[idx, idx, :] = 0.0
    support = affinity.sum(axis=1)
    total = support.sum(axis=0)
    weights = np.where(
        total > 0.0, support / np.where(total > 0.0, total, 1.0), 1.0 / tracks.shape[0]
    )
    fused = (weights * tracks).sum(axis=0)
    return np.clip(fused, tracks.min(axis=0), tracks.max(axis=0))


def mean_scales(tracks: np.ndarray) -> np.ndarray:
    """Plain per-snippet mean over scales, used when refinement is disabled."""
    return np.asarray(tracks, dtype=np.float64).mean(axis=0)


# ---------------------------------------------------------------------------
# Temporal refinement


def merge_runs(runs: List[Run], max_gap: int) -> List[Run]:
    """Join runs separated by at most ``max_gap`` empty snippets."""
    merged: List[Run] = []
    for start, end in runs:
        if merged and start - merged[-1][1] <= max_gap:
            merged[-1] = (merged[-1][0], end)
        else:
            merged.append((start, end))
    return merged


def filter_runs(runs: List[Run], min_length: int) -> List[Run]:
    return [(s, e) for s, e in runs if e - s >= min_length]


def plateau_mask(runs: List[Run], n: int, sigma_b: float) -> np.ndarray:
    """1 inside each run, Gaussian tails outside it, cut beyond ``3 sigma_b``."""
    t = np.arange(n, dtype=np.float64)
    mask = np.zeros(n, dtype=np.float64)
    for start, end in runs:
        dist = np.maximum(np.maximum(start - t, t - (end - 1)), 0.0)
        taper = np.exp(-(dist**2) / (2.0 * sigma_b**2))
        taper[dist > 3.0 * sigma_b] = 0.0
        mask = np.maximum(mask, taper)
    return mask


def refine_runs(scores: np.ndarray, cfg: RefineConfig) -> List[Run]:
    runs = find_runs(np.asarray(scores) > cfg.theta)
    return filter_runs(merge_runs(runs, cfg.max_gap), cfg.min_length)


def temporal_refine(
    scores: np.ndarray,
    cfg: RefineConfig,
    video_id: str = "",
    source: Branch = Branch.B,
) -> PseudoTrack:
    scores = np.asarray(scores, dtype=np.float64)
    runs = refine_runs(scores, cfg)
    mask = plateau_mask(runs, scores.shape[0], cfg.sigma_b)
    return PseudoTrack(video_id, source, mask)
