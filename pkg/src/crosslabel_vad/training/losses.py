"""Video-level MIL losses and the snippet-level soft focal loss."""

from dataclasses import dataclass
from typing import Collection, Dict, List, Optional, Tuple, Union

import numpy as np

from ..config import LossConfig, PseudoDirection
from ..diffcore import Tensor
from ..diffcore import ops
from ..exceptions import NonFiniteError, PreconditionError
from ..model.network import BranchOutputs
from ..model.pyramid import upsample


def _topk_index(values: np.ndarray, k: int) -> np.ndarray:
    # stable sort on the negated values keeps lower indices first among ties
    return np.argsort(-values, axis=0, kind="stable")[:k]


def topk_mean(scores: Tensor, k: int) -> Tensor:
    """Mean of the ``k`` largest entries of a length-``t`` vector."""
    flat = scores.reshape(-1) if scores.data.ndim != 1 else scores
    t = flat.shape[0]
    if not 1 <= k <= t:
        raise PreconditionError(f"top-K needs 1 <= K <= {t}, got K={k}")
    return flat[_topk_index(flat.data, k)].mean()


def _column_topk_mean(logits: Tensor, k: int) -> Tensor:
    """Per-column top-K mean of a ``t x M`` matrix, shaped ``1 x M``."""
    t, m = logits.shape
    if not 1 <= k <= t:
        raise PreconditionError(f"top-K needs 1 <= K <= {t}, got K={k}")
    rows = _topk_index(logits.data, k)
    cols = np.broadcast_to(np.arange(m), rows.shape)
    return logits[rows, cols].mean(axis=0).reshape(1, m)


def _clamp(p: Tensor, cfg: LossConfig) -> Tensor:
    return ops.clip(p, cfg.p_min, 1.0 - cfg.p_min)


def bce_video_loss(b_logits: List[Tensor], label: int, cfg: LossConfig) -> Tensor:
    """Binary cross-entropy of per-level top-K video scores, averaged over levels."""
    terms = []
    for logits in b_logits:
        k = cfg.top_k(logits.shape[0])
        v = _clamp(topk_mean(ops.sigmoid(logits), k), cfg)
        terms.append(-ops.log(v) if label else -ops.log(1.0 - v))
    return _mean(terms)


def mil_align_loss(
    c_logits: List[Tensor], labels: Collection[int], cfg: LossConfig
) -> Tensor:
    """Cross-entropy of per-level top-K category logits against the label set.

    With several positive categories the per-category terms are averaged.
    """
    positives = sorted(set(labels))
    if not positives:
        raise PreconditionError("mil_align_loss needs a non-empty label set")
    terms = []
    for logits in c_logits:
        video = _column_topk_mean(logits, cfg.top_k(logits.shape[0]))
        log_probs = ops.log_softmax(video, axis=1)
        terms.append(-log_probs[0, positives].mean())
    return _mean(terms)


def _power(x: Tensor, gamma: float) -> Tensor:
    if gamma == 0:
        return Tensor.const(np.ones(x.shape), x.dtype)
    if gamma == 2:
        return ops.square(x)
    return ops.exp(ops.log(x) * gamma)


def focal_soft_loss(
    pred: Tensor, target: Union[np.ndarray, Tensor], cfg: LossConfig
) -> Tensor:
    """Soft-target focal loss averaged over snippets; ``pred`` is clamped."""
    p = _clamp(pred.reshape(-1) if pred.data.ndim != 1 else pred, cfg)
    q_data = target.data if isinstance(target, Tensor) else np.asarray(target)
    q = Tensor.const(q_data.reshape(-1), p.dtype)
    if q.shape != p.shape:
        raise PreconditionError(
            f"Focal target has {q.shape[0]} snippets, prediction has {p.shape[0]}"
        )
    alpha, gamma = cfg.alpha, cfg.gamma
    positive = q * alpha * _power(1.0 - p, gamma) * ops.log(p)
    negative = (1.0 - q) * (1.0 - alpha) * _power(p, gamma) * ops.log(1.0 - p)
    return -(positive + negative).mean()


def total_loss(
    bce: Union[Tensor, float],
    nce: Union[Tensor, float],
    focal: Optional[Union[Tensor, float]] = None,
) -> Tensor:
    """Unweighted sum; stage 1 passes no focal term."""
    terms = []
    for name, term in (("bce", bce), ("nce", nce), ("focal", focal)):
        if term is None:
            continue
        tensor = term if isinstance(term, Tensor) else Tensor.const(float(term))
        if not np.all(np.isfinite(tensor.data)):
            raise NonFiniteError(f"Loss term '{name}' is not finite", op="total_loss")
        terms.append(tensor)
    result = terms[0]
    for term in terms[1:]:
        result = result + term
    return result


def _mean(terms: List[Tensor]) -> Tensor:
    result = terms[0]
    for term in terms[1:]:
        result = result + term
    return result * (1.0 / len(terms))


# ---------------------------------------------------------------------------
# Branch probabilities and the stage-2 wiring


def b_probabilities(b_logits: List[Tensor], n: int) -> List[Tensor]:
    """Per-level sigmoid scores upsampled to ``n`` snippets."""
    return [upsample(ops.sigmoid(level), n) for level in b_logits]


def c_probabilities(c_logits: List[Tensor], n: int) -> List[Tensor]:
    """Per-level ``1 - softmax_normal`` upsampled to ``n`` snippets."""
    probs = []
    for level in c_logits:
        normal = Tensor.const(np.eye(level.shape[1])[:, :1], level.dtype)
        abnormal = 1.0 - ops.softmax(level, axis=1) @ normal
        probs.append(upsample(abnormal, n))
    return probs


def branch_focal(probs: List[Tensor], target: np.ndarray, cfg: LossConfig) -> Tensor:
    """Focal loss per level after upsampling, averaged over levels."""
    return _mean([focal_soft_loss(p, target, cfg) for p in probs])


@dataclass
class LossBreakdown:
    bce: Tensor
    nce: Tensor
    focal: Optional[Tensor]
    total: Tensor

    def values(self) -> Dict[str, float]:
        return {
            "bce": self.bce.item(),
            "nce": self.nce.item(),
            "focal": self.focal.item() if self.focal is not None else 0.0,
            "total": self.total.item(),
        }


def focal_targets(
    direction: PseudoDirection,
    pseudo_b: np.ndarray,
    pseudo_c: np.ndarray,
) -> Dict[str, np.ndarray]:
    """Which track supervises which branch; keys are ``"b"`` and/or ``"c"``."""
    if direction is PseudoDirection.BOTH:
        return {"b": pseudo_c, "c": pseudo_b}
    if direction is PseudoDirection.SELF:
        return {"b": pseudo_b, "c": pseudo_c}
    if direction is PseudoDirection.B_TO_C:
        return {"c": pseudo_b}
    if direction is PseudoDirection.C_TO_B:
        return {"b": pseudo_c}
    return {}


def video_loss(
    outputs: BranchOutputs,
    label_set: Collection[int],
    cfg: LossConfig,
    n: int,
    direction: PseudoDirection = PseudoDirection.NONE,
    pseudo: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> LossBreakdown:
    """Full training objective for one video.

    ``pseudo`` is ``(pseudo_b, pseudo_c)`` as arrays of length ``n``; when it is
    ``None`` or ``direction`` is ``NONE`` only the video-level terms are used.
    """
    binary = 0 if set(label_set) == {0} else 1
    bce = bce_video_loss(outputs.b_logits, binary, cfg)
    nce = mil_align_loss(outputs.c_logits, label_set, cfg)
    focal: Optional[Tensor] = None
    if pseudo is not None:
        targets = focal_targets(direction, pseudo[0], pseudo[1])
        terms = []
        if "b" in targets:
            b_probs = b_probabilities(outputs.b_logits, n)
            terms.append(branch_focal(b_probs, targets["b"], cfg))
        if "c" in targets:
            c_probs = c_probabilities(outputs.c_logits, n)
            terms.append(branch_focal(c_probs, targets["c"], cfg))
        if terms:
            focal = terms[0] if len(terms) == 1 else terms[0] + terms[1]
    return LossBreakdown(bce, nce, focal, total_loss(bce, nce, focal))
