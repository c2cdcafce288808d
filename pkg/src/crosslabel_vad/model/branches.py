"""Binary (B) and category (C) branch heads.

The B-branch scores every snippet of every level with its own two-layer MLP.
The C-branch compares unit-normalized snippet features against per-level
prompt embeddings composed from shared learnable tokens.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np
import structlog

from ..diffcore import ParamStore, Tensor
from ..diffcore import ops
from ..exceptions import ShapeMismatchError, ZeroNormError

logger = structlog.get_logger(__name__)


# ---------------------------------------------------------------------------
# B-branch


def init_b_branch(
    store: ParamStore, d: int, levels: int, rng: np.random.Generator
) -> None:
    """Per-level MLP ``d -> d/2 -> 1``.

    The output layer is drawn from ``U(-1/sqrt(d/2), 1/sqrt(d/2))``.
    """
    hidden = max(1, d // 2)
    bound = 1.0 / np.sqrt(hidden)
    for i in range(1, levels + 1):
        store.add(
            f"b.l{i}.w1",
            rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hidden)).astype(np.float32),
        )
        store.add(f"b.l{i}.b1", np.zeros((1, hidden), dtype=np.float32))
        store.add(
            f"b.l{i}.w2",
            rng.uniform(-bound, bound, size=(hidden, 1)).astype(np.float32),
        )
        store.add(f"b.l{i}.b2", np.zeros((1, 1), dtype=np.float32))


def b_branch_scores(pyramid: List[Tensor], p: Mapping[str, Tensor]) -> List[Tensor]:
    """Raw anomaly logits, one ``t_i x 1`` matrix per level."""
    logits = []
    for i, level in enumerate(pyramid, 1):
        w1 = p[f"b.l{i}.w1"]
        if level.data.ndim != 2 or level.shape[1] != w1.shape[0]:
            raise ShapeMismatchError(
                f"B-branch level {i} expects width {w1.shape[0]}, got {level.shape}",
                op="b_branch_scores",
            )
        hidden = ops.relu(level @ w1 + p[f"b.l{i}.b1"])
        logits.append(hidden @ p[f"b.l{i}.w2"] + p[f"b.l{i}.b2"])
    return logits


# ---------------------------------------------------------------------------
# C-branch


@dataclass
class PromptBank:
    """Learnable tokens composing the per-level text features.

    ``categories`` is ``M x d``, ``normal`` and ``abnormal`` are ``1 x d``
    state tokens shared by all categories and levels, ``levels`` is ``L x d``
    with one row shared by all categories at that level, and ``log_tau`` is the
    ``1 x 1`` log temperature.
    """

    categories: Tensor
    normal: Tensor
    abnormal: Tensor
    levels: Tensor
    log_tau: Tensor

    @classmethod
    def from_params(cls, p: Mapping[str, Tensor]) -> "PromptBank":
        return cls(
            categories=p["prompt.e_cat"],
            normal=p["prompt.n_p"],
            abnormal=p["prompt.a_p"],
            levels=p["prompt.q"],
            log_tau=p["prompt.log_tau"],
        )

    @property
    def num_categories(self) -> int:
        return int(self.categories.shape[0])

    @property
    def num_levels(self) -> int:
        return int(self.levels.shape[0])

    @property
    def temperature(self) -> Tensor:
        return ops.exp(self.log_tau)


def init_prompt_bank(
    store: ParamStore,
    num_categories: int,
    d: int,
    levels: int,
    rng: np.random.Generator,
    temperature: float = 0.07,
) -> None:
    store.add(
        "prompt.e_cat",
        (rng.normal(0.0, 1.0, (num_categories, d)) / np.sqrt(d)).astype(np.float32),
    )
    store.add("prompt.n_p", np.zeros((1, d), dtype=np.float32))
    store.add("prompt.a_p", np.zeros((1, d), dtype=np.float32))
    store.add("prompt.q", np.zeros((levels, d), dtype=np.float32))
    store.add("prompt.log_tau", np.full((1, 1), np.log(temperature), dtype=np.float32))


def _level_selector(level: int, levels: int, num_categories: int) -> np.ndarray:
    # M x L matrix copying row ``level`` of Q to every category
    selector = np.zeros((num_categories, levels))
    selector[:, level] = 1.0
    return selector


def compose_raw_prompts(bank: PromptBank) -> List[Tensor]:
    """Un-normalized ``e_cat[m] + state(m) + Q[i]`` for every level."""
    m, dtype = bank.num_categories, bank.categories.dtype
    is_normal = np.zeros((m, 1))
    is_normal[0, 0] = 1.0
    states = Tensor.const(is_normal, dtype) @ bank.normal + Tensor.const(
        1.0 - is_normal, dtype
    ) @ bank.abnormal
    base = bank.categories + states
    return [
        base + Tensor.const(_level_selector(i, bank.num_levels, m), dtype) @ bank.levels
        for i in range(bank.num_levels)
    ]


def compose_prompt_embeddings(bank: PromptBank) -> List[Tensor]:
    """Unit-normalized ``M x d`` text features, one per level."""
    composed = []
    for i, raw in enumerate(compose_raw_prompts(bank), 1):
        norms = np.linalg.norm(raw.data, axis=1)
        if np.any(norms == 0):
            category = int(np.flatnonzero(norms == 0)[0])
            raise ZeroNormError(
                f"Prompt for category {category} at level {i} has zero norm",
                op="compose_prompt_embeddings",
            )
        composed.append(ops.normalize_rows(raw))
    return composed


def c_branch_scores(
    pyramid: List[Tensor],
    prompts: List[Tensor],
    temperature: Union[Tensor, float],
    diagnostics: Optional[Dict[str, Any]] = None,
) -> List[Tensor]:
    """Category logits ``cos(F_v[t], F_T[m]) / tau``, one ``t_i x M`` per level.

    Zero-norm snippet rows yield zero similarity; their indices are recorded in
    ``diagnostics["zero_norm_rows"]`` keyed by level.
    """
    if len(prompts) != len(pyramid):
        raise ShapeMismatchError(
            f"{len(pyramid)} pyramid levels but {len(prompts)} prompt sets",
            op="c_branch_scores",
        )
    logits = []
    for i, (level, text) in enumerate(zip(pyramid, prompts), 1):
        if level.data.ndim != 2 or level.shape[1] != text.shape[1]:
            raise ShapeMismatchError(
                f"C-branch level {i} expects width {text.shape[1]}, got {level.shape}",
                op="c_branch_scores",
            )
        zero_rows = np.flatnonzero(~np.any(level.data != 0, axis=1))
        if zero_rows.size:
            logger.warning("zero_norm_video_rows", level=i, count=int(zero_rows.size))
            if diagnostics is not None:
                diagnostics.setdefault("zero_norm_rows", {})[i] = zero_rows.tolist()
        similarity = ops.normalize_rows(level) @ text.T
        logits.append(similarity / temperature)
    return logits
