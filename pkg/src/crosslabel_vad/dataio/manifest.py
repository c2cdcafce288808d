"""Manifest and category-table I/O plus dataset loading.

The manifest is a UTF-8 TSV with a header row ``video_id feature_path labels
gt_path``. Lines starting with ``#`` carry metadata (``# d=32``, ``# M=7``).
Without ``# M=`` the category count is taken from ``categories.tsv`` next to
the manifest. Paths are relative to the manifest directory.
"""

from pathlib import Path
from typing import Dict, List, Optional, Set, Union

import numpy as np
import structlog

from ..exceptions import (
    DimensionMismatchError,
    LabelRangeError,
    ManifestError,
    MissingFileError,
)
from .codec import read_features, read_gt
from .models import Dataset, DatasetManifest, FeatureSequence, ManifestEntry

logger = structlog.get_logger(__name__)

HEADER = ("video_id", "feature_path", "labels", "gt_path")
NO_GT = "-"
CATEGORIES_FILE = "categories.tsv"


def parse_manifest(path: Union[str, Path]) -> DatasetManifest:
    """Parse the manifest text without touching the referenced files."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Manifest not found: {path}", path=str(path))

    meta: Dict[str, int] = {}
    entries: List[ManifestEntry] = []
    seen: Set[str] = set()
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                try:
                    meta[key.strip()] = int(value.strip())
                except ValueError as e:
                    raise ManifestError(
                        f"{path}:{lineno}: bad metadata line {line!r}", path=str(path)
                    ) from e
            continue
        cols = line.split("\t")
        if tuple(cols) == HEADER:
            continue
        if len(cols) != 4:
            raise ManifestError(
                f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}",
                path=str(path),
            )
        video_id, feature_path, labels, gt_path = cols
        if video_id in seen:
            raise ManifestError(
                f"{path}:{lineno}: duplicate video_id '{video_id}'",
                video_id=video_id,
                path=str(path),
            )
        seen.add(video_id)
        try:
            label_ids = tuple(int(v) for v in labels.split(",") if v.strip())
        except ValueError as e:
            raise ManifestError(
                f"{path}:{lineno}: labels must be integers", video_id=video_id
            ) from e
        entries.append(
            ManifestEntry(
                video_id=video_id,
                feature_path=path.parent / feature_path,
                labels=label_ids or (0,),
                gt_path=None if gt_path.strip() == NO_GT else path.parent / gt_path,
            )
        )

    num_categories = meta.get("M")
    if num_categories is None:
        names = read_categories(path.parent / CATEGORIES_FILE)
        if not names:
            raise ManifestError(
                f"{path}: missing '# M=' metadata line and no {CATEGORIES_FILE}",
                path=str(path),
            )
        num_categories = max(names) + 1
        logger.info(
            "categories_inferred", manifest=str(path), num_categories=num_categories
        )
    return DatasetManifest(
        entries=entries,
        dim=meta.get("d", 0),
        num_categories=num_categories,
        root=path.parent,
    )


def write_manifest(path: Union[str, Path], manifest: DatasetManifest) -> None:
    """Write a manifest, storing paths relative to its directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# d={manifest.dim}", f"# M={manifest.num_categories}", "\t".join(HEADER)]
    for entry in manifest.entries:
        gt = _relative(entry.gt_path, path.parent) if entry.gt_path else NO_GT
        lines.append(
            "\t".join(
                [
                    entry.video_id,
                    _relative(entry.feature_path, path.parent),
                    ",".join(str(label) for label in entry.labels),
                    gt,
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _relative(target: Path, root: Path) -> str:
    try:
        return Path(target).relative_to(root).as_posix()
    except ValueError:
        return Path(target).as_posix()


def write_categories(path: Union[str, Path], names: Dict[int, str]) -> None:
    path = Path(path)
    rows = ["id\tname"] + [f"{cid}\t{names[cid]}" for cid in sorted(names)]
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_categories(path: Union[str, Path]) -> Dict[int, str]:
    """Read ``categories.tsv``; a missing table yields an empty mapping."""
    path = Path(path)
    if not path.is_file():
        return {}
    names: Dict[int, str] = {}
    for line in path.read_text(encoding="utf-8").splitlines()[1:]:
        if line.strip():
            cid, _, name = line.partition("\t")
            names[int(cid)] = name
    return names


def load_dataset(manifest_path: Union[str, Path]) -> Dataset:
    """Load every sequence of a manifest in order, validating labels and ``d``."""
    manifest = parse_manifest(manifest_path)
    sequences: List[FeatureSequence] = []
    dim: Optional[int] = manifest.dim or None

    for entry in manifest.entries:
        bad = [c for c in entry.labels if not 0 <= c < manifest.num_categories]
        if bad:
            raise LabelRangeError(
                f"Video '{entry.video_id}' has label id {bad[0]} outside "
                f"0..{manifest.num_categories - 1}",
                video_id=entry.video_id,
            )
        if not entry.feature_path.is_file():
            raise MissingFileError(
                f"Video '{entry.video_id}': feature file not found: "
                f"{entry.feature_path}",
                video_id=entry.video_id,
                path=str(entry.feature_path),
            )
        seq = read_features(entry.feature_path)
        if dim is None:
            dim = seq.dim
        elif seq.dim != dim:
            raise DimensionMismatchError(
                f"Video '{entry.video_id}' has d={seq.dim}, expected d={dim}",
                video_id=entry.video_id,
            )

        gt_frames = None
        if entry.gt_path is not None:
            gt_frames = read_gt(entry.gt_path)
            if gt_frames.shape[0] != seq.n_raw:
                raise DimensionMismatchError(
                    f"Video '{entry.video_id}': GT has {gt_frames.shape[0]} lines "
                    f"for {seq.n_raw} snippets",
                    video_id=entry.video_id,
                )
            if np.any((gt_frames < 0) | (gt_frames >= manifest.num_categories)):
                raise LabelRangeError(
                    f"Video '{entry.video_id}' has GT category ids outside "
                    f"0..{manifest.num_categories - 1}",
                    video_id=entry.video_id,
                )

        sequences.append(
            FeatureSequence(
                video_id=entry.video_id,
                features=seq.features,
                video_labels=frozenset(entry.labels),
                gt_frames=gt_frames,
            )
        )

    logger.info(
        "dataset_loaded",
        manifest=str(manifest_path),
        videos=len(sequences),
        dim=dim,
        categories=manifest.num_categories,
    )
    return Dataset(
        sequences,
        dim=dim or 0,
        num_categories=manifest.num_categories,
        category_names=read_categories(manifest.root / CATEGORIES_FILE),
    )
