"""The dual-branch model: encoder, B-branch heads and prompt bank."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import structlog

from ..config import TrainConfig
from ..diffcore import ParamStore, Tensor, read_checkpoint, write_checkpoint
from ..exceptions import ShapeMismatchError, UntrainedModelError
from .branches import (
    PromptBank,
    b_branch_scores,
    c_branch_scores,
    compose_prompt_embeddings,
    init_b_branch,
    init_prompt_bank,
)
from .pyramid import ScorePyramid, encode_pyramid, init_encoder

logger = structlog.get_logger(__name__)


@dataclass
class BranchOutputs:
    """Per-level logits of both branches for one video.

    ``diagnostics`` carries ``zero_norm_rows`` (level to snippet indices) when
    a level had all-zero snippet features.
    """

    b_logits: List[Tensor]  # t_i x 1
    c_logits: List[Tensor]  # t_i x M
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_pyramids(self) -> Tuple[ScorePyramid, ScorePyramid]:
        """Detached copies of both branches, checked for halving and finiteness."""
        return ScorePyramid.from_tensors(self.b_logits), ScorePyramid.from_tensors(
            self.c_logits
        )


class CrossLabelModel:
    """Stage-1 and stage-2 models share this architecture."""

    def __init__(
        self, params: ParamStore, circular: bool = False, trained: bool = False
    ):
        self.params = params
        self.circular = circular
        self.trained = trained
        self._validate()

    @classmethod
    def initialize(
        cls,
        dim_in: int,
        num_categories: int,
        cfg: TrainConfig,
        seed: Optional[int] = None,
        identity_encoder: bool = False,
    ) -> "CrossLabelModel":
        """Fresh seeded parameters; the draw order fixes checkpoint bytes."""
        rng = np.random.default_rng(cfg.seed if seed is None else seed)
        store = ParamStore()
        init_encoder(
            store, dim_in, cfg.hidden_dim, cfg.levels, rng, identity=identity_encoder
        )
        init_b_branch(store, cfg.hidden_dim, cfg.levels, rng)
        init_prompt_bank(
            store, num_categories, cfg.hidden_dim, cfg.levels, rng, cfg.temperature
        )
        return cls(store)

    @classmethod
    def load(cls, path: Path) -> "CrossLabelModel":
        """Rebuild a model from a checkpoint; shapes come from the file."""
        model = cls(read_checkpoint(path), trained=True)
        logger.info(
            "checkpoint_loaded",
            path=str(path),
            levels=model.levels,
            categories=model.num_categories,
        )
        return model

    def save(self, path: Path) -> None:
        write_checkpoint(path, self.params)

    def _validate(self) -> None:
        for name in ("enc.proj.w", "prompt.e_cat", "prompt.q", "prompt.log_tau"):
            if name not in self.params:
                raise ShapeMismatchError(f"Missing parameter '{name}'", op="model")
        for i in range(1, self.levels + 1):
            if f"enc.l{i}.w" not in self.params or f"b.l{i}.w1" not in self.params:
                raise ShapeMismatchError(
                    f"Parameters for level {i} are missing", op="model"
                )

    @property
    def dim_in(self) -> int:
        return int(self.params["enc.proj.w"].shape[0])

    @property
    def hidden_dim(self) -> int:
        return int(self.params["enc.proj.w"].shape[1])

    @property
    def num_categories(self) -> int:
        return int(self.params["prompt.e_cat"].shape[0])

    @property
    def levels(self) -> int:
        return int(self.params["prompt.q"].shape[0])

    def forward(
        self,
        p: Mapping[str, Tensor],
        features: np.ndarray,
        diagnostics: Optional[Dict[str, Any]] = None,
    ) -> BranchOutputs:
        """Differentiable forward pass on ``n x d_in`` resampled features."""
        if diagnostics is None:
            diagnostics = {}
        pyramid = encode_pyramid(features, p, self.levels, circular=self.circular)
        bank = PromptBank.from_params(p)
        prompts = compose_prompt_embeddings(bank)
        return BranchOutputs(
            b_logits=b_branch_scores(pyramid, p),
            c_logits=c_branch_scores(pyramid, prompts, bank.temperature, diagnostics),
            diagnostics=diagnostics,
        )

    def predict(self, features: np.ndarray) -> BranchOutputs:
        """Forward pass on the current values; ``diagnostics`` is always filled."""
        return self.forward(self.params.constants(), features)

    def require_trained(self) -> None:
        if not self.trained:
            raise UntrainedModelError(
                "Model has not been trained; load a checkpoint or run train first"
            )
