"""Multi-scale encoder and the two branch heads."""

from .branches import (
    PromptBank,
    b_branch_scores,
    c_branch_scores,
    compose_prompt_embeddings,
    compose_raw_prompts,
)
from .network import BranchOutputs, CrossLabelModel
from .pyramid import (
    ScorePyramid,
    encode_pyramid,
    interpolation_matrix,
    level_lengths,
    resample_to_n,
    upsample,
)

__all__ = [
    "PromptBank",
    "b_branch_scores",
    "c_branch_scores",
    "compose_prompt_embeddings",
    "compose_raw_prompts",
    "BranchOutputs",
    "CrossLabelModel",
    "ScorePyramid",
    "encode_pyramid",
    "interpolation_matrix",
    "level_lengths",
    "resample_to_n",
    "upsample",
]
