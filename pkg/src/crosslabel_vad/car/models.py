"""Pseudo-label tracks."""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..exceptions import ShapeMismatchError

Run = Tuple[int, int]  # half-open [start, end)


class Branch(str, Enum):
    B = "B"
    C = "C"


def find_runs(mask: np.ndarray) -> List[Run]:
    """Maximal runs of ``True`` as half-open intervals."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


@dataclass
class PseudoTrack:
    """Length-``n`` soft supervision in [0, 1] emitted for one video and branch."""

    video_id: str
    source: Branch
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ShapeMismatchError(
                f"Pseudo track must be a vector, got {self.values.shape}",
                op="pseudo_track",
            )
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ShapeMismatchError(
                f"Pseudo track for '{self.video_id}' leaves [0, 1]", op="pseudo_track"
            )

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def skeleton(self) -> np.ndarray:
        """Snippets at full strength, i.e. inside a surviving segment."""
        return self.values >= 1.0

    @property
    def segments(self) -> List[Run]:
        return find_runs(self.skeleton)

    @classmethod
    def zeros(cls, video_id: str, source: Branch, n: int) -> "PseudoTrack":
        return cls(video_id, source, np.zeros(n))
