"""Minimal differentiable-numerics kernel."""

from . import tensor as ops
from .checkpoint import read_checkpoint, write_checkpoint
from .engine import evaluate, forward_backward, grad_check
from .optim import OptimState, adam_step
from .params import ParamStore, ParamTensor
from .tensor import Tensor

__all__ = [
    "ops",
    "Tensor",
    "ParamTensor",
    "ParamStore",
    "OptimState",
    "adam_step",
    "forward_backward",
    "evaluate",
    "grad_check",
    "read_checkpoint",
    "write_checkpoint",
]
