"""Multi-scale inference: average upsampled logits, then squash."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import special

from ..dataio.models import FeatureSequence
from ..exceptions import DataError, ShapeMismatchError
from ..model.network import CrossLabelModel
from ..model.pyramid import interpolation_matrix, resample_to_n


@dataclass
class InferenceResult:
    """``s_ab`` is length ``n`` in [0, 1]; ``s_cls`` is ``n x M`` with unit rows.

    ``zero_norm_rows`` maps a level to the snippets whose encoded features were
    all zero and therefore scored zero similarity in the C-branch.
    """

    video_id: str
    s_ab: np.ndarray
    s_cls: np.ndarray
    zero_norm_rows: Dict[int, List[int]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.s_ab.shape[0])


def _mean_upsampled(levels: Sequence[np.ndarray], n: int) -> np.ndarray:
    total: Optional[np.ndarray] = None
    for level in levels:
        level = np.asarray(level, dtype=np.float64)
        if level.ndim == 1:
            level = level[:, None]
        up = interpolation_matrix(n, level.shape[0]) @ level
        total = up if total is None else total + up
    if total is None:
        raise ShapeMismatchError("Inference needs at least one level", op="inference")
    return total / len(levels)


def combine_levels(
    b_levels: Sequence[np.ndarray],
    c_levels: Sequence[np.ndarray],
    n: int,
    video_id: str = "",
) -> InferenceResult:
    """Average logits over levels at length ``n``, then sigmoid / softmax."""
    b_mean = _mean_upsampled(b_levels, n)[:, 0]
    c_mean = _mean_upsampled(c_levels, n)
    return InferenceResult(
        video_id=video_id,
        s_ab=special.expit(b_mean),
        s_cls=special.softmax(c_mean, axis=1),
    )


def aggregate_inference(
    model: CrossLabelModel, video: FeatureSequence, n: int
) -> InferenceResult:
    features = resample_to_n(video.features, n, model.levels)
    outputs = model.predict(features.astype(model.params["enc.proj.w"].values.dtype))
    b_pyramid, c_pyramid = outputs.to_pyramids()
    result = combine_levels(b_pyramid.levels, c_pyramid.levels, n, video.video_id)
    result.zero_norm_rows = dict(outputs.diagnostics.get("zero_norm_rows", {}))
    return result


def infer_dataset(
    model: CrossLabelModel, videos: Sequence[FeatureSequence], n: int
) -> List[InferenceResult]:
    return [aggregate_inference(model, video, n) for video in videos]


def write_scores(
    scores_dir: Union[str, Path],
    result: InferenceResult,
    category_names: Optional[Dict[int, str]] = None,
) -> Path:
    """``snippet, S_ab, S_cls_<name>...`` rows for one video."""
    names = category_names or {}
    m = result.s_cls.shape[1]
    header = ["snippet", "S_ab"] + [f"S_cls_{names.get(c, c)}" for c in range(m)]
    rows = ["\t".join(header)]
    for t in range(result.n):
        values = [f"{result.s_ab[t]:.9g}"] + [f"{v:.9g}" for v in result.s_cls[t]]
        rows.append("\t".join([str(t)] + values))
    path = Path(scores_dir) / f"{result.video_id}.tsv"
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write scores {path}: {e}", path=str(path)) from e
    return path
