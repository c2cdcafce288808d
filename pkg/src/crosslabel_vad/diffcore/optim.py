"""Adam optimizer over a ParamStore."""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..exceptions import NonFiniteError
from .params import ParamStore


@dataclass
class OptimState:
    """Per-parameter moments and the bias-correction step counter."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: ParamStore, **hyper: float) -> "OptimState":
        state = cls(**hyper)  # type: ignore[arg-type]
        for p in params:
            state.first[p.name] = np.zeros_like(p.values)
            state.second[p.name] = np.zeros_like(p.values)
        return state


def adam_step(params: ParamStore, state: OptimState) -> None:
    """Apply one bias-corrected Adam update and clear the gradients."""
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise NonFiniteError(f"Non-finite gradient for '{p.name}'", op="adam_step")

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for p in params:
        m = state.first.setdefault(p.name, np.zeros_like(p.values))
        v = state.second.setdefault(p.name, np.zeros_like(p.values))
        m *= state.beta1
        m += (1.0 - state.beta1) * p.grad
        v *= state.beta2
        v += (1.0 - state.beta2) * p.grad * p.grad
        m_hat = m / correction1
        v_hat = v / correction2
        p.values -= (state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(
            p.values.dtype
        )
        p.zero_grad()
