"""Seeded synthetic snippet features standing in for frozen image-encoder output.

Normal snippets are drawn from a Gaussian cloud around a base mean. Each
abnormal video carries one category and 1-3 planted segments whose snippets are
shifted along that category's unit direction, with a raised-cosine ramp of
``smooth_width`` snippets at each boundary.
"""

from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import structlog

from ..config import SynthConfig
from ..exceptions import DataError
from .codec import write_features, write_gt
from .manifest import CATEGORIES_FILE, write_categories, write_manifest
from .models import NORMAL, Dataset, DatasetManifest, FeatureSequence, ManifestEntry

logger = structlog.get_logger(__name__)

DEFAULT_CATEGORY_NAMES = (
    "normal",
    "abuse",
    "car_accident",
    "explosion",
    "fighting",
    "riot",
    "shooting",
)

MANIFEST_FILE = "manifest.tsv"


def category_names(num_categories: int) -> Dict[int, str]:
    if num_categories <= len(DEFAULT_CATEGORY_NAMES):
        return {i: DEFAULT_CATEGORY_NAMES[i] for i in range(num_categories)}
    names = {i: name for i, name in enumerate(DEFAULT_CATEGORY_NAMES)}
    for i in range(len(DEFAULT_CATEGORY_NAMES), num_categories):
        names[i] = f"category_{i}"
    return names


def ramp_amplitude(
    n_raw: int, segments: List[Tuple[int, int]], width: float
) -> np.ndarray:
    """Per-snippet shift amplitude in [0, 1] for half-open ``[start, end)`` runs."""
    centers = np.arange(n_raw, dtype=np.float64) + 0.5
    amplitude = np.zeros(n_raw, dtype=np.float64)
    for start, end in segments:
        # signed distance to the nearest boundary, positive inside
        u = np.minimum(centers - start, end - centers)
        if width <= 0.0:
            a = (u > 0).astype(np.float64)
        else:
            a = np.where(
                u >= width / 2,
                1.0,
                np.where(u <= -width / 2, 0.0, 0.5 * (1.0 + np.sin(np.pi * u / width))),
            )
        amplitude = np.maximum(amplitude, a)
    return amplitude


def _plant_segments(
    rng: np.random.Generator, n_raw: int, cfg: SynthConfig
) -> List[Tuple[int, int]]:
    count = int(rng.integers(1, 4))
    zone = n_raw // count
    segments = []
    for z in range(count):
        length = int(rng.integers(cfg.min_segment, cfg.max_segment + 1))
        # leave one snippet free at the end of each zone so segments never touch
        start = zone * z + int(rng.integers(0, zone - length))
        segments.append((start, start + length))
    return segments


def synthesize(cfg: SynthConfig) -> Dataset:
    """Build the synthetic dataset in memory; a pure function of ``cfg``."""
    rng = np.random.default_rng(cfg.seed)
    base = rng.normal(0.0, 1.0, size=cfg.dim)
    directions = rng.normal(0.0, 1.0, size=(cfg.num_categories, cfg.dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    num_abnormal = int(round(cfg.anomaly_ratio * cfg.num_videos))
    abnormal = np.zeros(cfg.num_videos, dtype=bool)
    abnormal[rng.permutation(cfg.num_videos)[:num_abnormal]] = True

    width = len(str(cfg.num_videos - 1))
    sequences: List[FeatureSequence] = []
    for index in range(cfg.num_videos):
        n_raw = int(rng.integers(cfg.min_length, cfg.max_length + 1))
        features = base + cfg.noise_std * rng.normal(0.0, 1.0, size=(n_raw, cfg.dim))
        gt = np.zeros(n_raw, dtype=np.int64)
        labels = frozenset({NORMAL})
        if abnormal[index]:
            category = int(rng.integers(1, cfg.num_categories))
            segments = _plant_segments(rng, n_raw, cfg)
            amplitude = ramp_amplitude(n_raw, segments, cfg.smooth_width)
            features += np.outer(amplitude, cfg.shift_magnitude * directions[category])
            for start, end in segments:
                gt[start:end] = category
            labels = frozenset({category})
        sequences.append(
            FeatureSequence(
                video_id=f"vid_{index:0{width}d}",
                features=features.astype(np.float32),
                video_labels=labels,
                gt_frames=gt,
            )
        )
    return Dataset(
        sequences,
        dim=cfg.dim,
        num_categories=cfg.num_categories,
        category_names=category_names(cfg.num_categories),
    )


def write_dataset(out_dir: Union[str, Path], dataset: Dataset) -> DatasetManifest:
    """Persist features, GT, manifest and category table under ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(
            f"Cannot create output directory {out_dir}: {e}", path=str(out_dir)
        ) from e

    entries: List[ManifestEntry] = []
    for seq in dataset:
        feature_path = out_dir / "features" / f"{seq.video_id}.cplf"
        write_features(feature_path, seq)
        gt_path = None
        if seq.gt_frames is not None:
            gt_path = out_dir / "gt" / f"{seq.video_id}.txt"
            write_gt(gt_path, seq.gt_frames)
        entries.append(
            ManifestEntry(
                video_id=seq.video_id,
                feature_path=feature_path,
                labels=tuple(sorted(seq.video_labels)),
                gt_path=gt_path,
            )
        )
    manifest = DatasetManifest(
        entries=entries,
        dim=dataset.dim,
        num_categories=dataset.num_categories,
        root=out_dir,
    )
    try:
        write_manifest(out_dir / MANIFEST_FILE, manifest)
        write_categories(out_dir / CATEGORIES_FILE, dataset.category_names)
    except OSError as e:
        raise DataError(
            f"Cannot write manifest in {out_dir}: {e}", path=str(out_dir)
        ) from e
    return manifest


def generate_synthetic_dataset(
    cfg: SynthConfig, out_dir: Union[str, Path]
) -> DatasetManifest:
    """Generate and persist a dataset; identical ``cfg`` gives identical bytes."""
    dataset = synthesize(cfg)
    manifest = write_dataset(out_dir, dataset)
    logger.info(
        "synthetic_dataset_written",
        out_dir=str(out_dir),
        videos=len(dataset),
        abnormal=sum(1 for seq in dataset if not seq.is_normal),
        seed=cfg.seed,
    )
    return manifest


def nearest_centroid_scores(dataset: Dataset) -> List[np.ndarray]:
    """GT-informed oracle: per-snippet abnormality from raw features.

    Centroids are fitted per GT category over all snippets. The score is the
    squared distance to the normal centroid minus the distance to the nearest
    abnormal centroid, so higher means more abnormal.
    """
    feats = np.concatenate([seq.features for seq in dataset]).astype(np.float64)
    gts = np.concatenate(
        [
            np.zeros(seq.n_raw, np.int64) if seq.gt_frames is None else seq.gt_frames
            for seq in dataset
        ]
    )
    present = [c for c in range(dataset.num_categories) if np.any(gts == c)]
    centroids = {c: feats[gts == c].mean(axis=0) for c in present}
    if NORMAL not in centroids or len(centroids) < 2:
        return [np.zeros(seq.n_raw) for seq in dataset]

    scores = []
    for seq in dataset:
        x = seq.features.astype(np.float64)
        d_normal = np.sum((x - centroids[NORMAL]) ** 2, axis=1)
        d_abnormal = np.min(
            [np.sum((x - centroids[c]) ** 2, axis=1) for c in present if c != NORMAL],
            axis=0,
        )
        scores.append(d_normal - d_abnormal)
    return scores
