"""Data models for feature sequences and dataset manifests."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple, overload

import numpy as np

NORMAL = 0


@dataclass
class FeatureSequence:
    """One video: snippet embeddings plus its labels."""

    video_id: str
    features: np.ndarray  # n_raw x d
    video_labels: FrozenSet[int] = frozenset({NORMAL})
    gt_frames: Optional[np.ndarray] = None  # length n_raw, evaluation only

    @property
    def n_raw(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def is_normal(self) -> bool:
        """True when the video-level label set is exactly {normal}."""
        return self.video_labels == frozenset({NORMAL})

    @property
    def binary_label(self) -> int:
        return 0 if self.is_normal else 1


@dataclass(frozen=True)
class ManifestEntry:
    """One manifest row; paths are resolved against the manifest directory."""

    video_id: str
    feature_path: Path
    labels: Tuple[int, ...]
    gt_path: Optional[Path] = None


@dataclass
class DatasetManifest:
    """Entries plus the feature width ``d`` and category count ``M``."""

    entries: List[ManifestEntry]
    dim: int
    num_categories: int
    root: Path = field(default_factory=Path)


class Dataset(Sequence[FeatureSequence]):
    """Loaded sequences in manifest order, with dataset-wide ``d`` and ``M``."""

    def __init__(
        self,
        sequences: List[FeatureSequence],
        dim: int,
        num_categories: int,
        category_names: Optional[Dict[int, str]] = None,
    ):
        self.sequences = sequences
        self.dim = dim
        self.num_categories = num_categories
        self.category_names = category_names or {}

    @overload
    def __getitem__(self, index: int) -> FeatureSequence: ...

    @overload
    def __getitem__(self, index: slice) -> "Dataset": ...

    def __getitem__(self, index):  # type: ignore[no-untyped-def]
        if isinstance(index, slice):
            return Dataset(
                self.sequences[index],
                self.dim,
                self.num_categories,
                self.category_names,
            )
        return self.sequences[index]

    def __len__(self) -> int:
        return len(self.sequences)

    def __iter__(self) -> Iterator[FeatureSequence]:
        return iter(self.sequences)

    def category_name(self, category: int) -> str:
        return self.category_names.get(category, f"category_{category}")
