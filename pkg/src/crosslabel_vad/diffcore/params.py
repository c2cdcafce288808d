"""Named trainable parameters."""

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from ..exceptions import NonFiniteError, ShapeMismatchError
from .tensor import Tensor


@dataclass
class ParamTensor:
    """A named array with a same-shape gradient accumulator."""

    name: str
    values: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values)
        self.grad = np.zeros_like(self.values)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    def assign(self, values: np.ndarray) -> None:
        """Replace the values in place; the shape must not change."""
        values = np.asarray(values, dtype=self.values.dtype)
        if values.shape != self.values.shape:
            raise ShapeMismatchError(
                f"Parameter '{self.name}' has shape {self.shape}, "
                f"cannot assign {values.shape}",
                op="assign",
            )
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"Non-finite values for '{self.name}'", op="assign")
        self.values[...] = values

    def zero_grad(self) -> None:
        self.grad[...] = 0


class ParamStore:
    """Ordered collection of parameters; order fixes checkpoint layout."""

    def __init__(self) -> None:
        self._params: "OrderedDict[str, ParamTensor]" = OrderedDict()

    def add(self, name: str, values: np.ndarray) -> ParamTensor:
        if name in self._params:
            raise ValueError(f"Duplicate parameter name: {name}")
        param = ParamTensor(name, values)
        self._params[name] = param
        return param

    def __getitem__(self, name: str) -> ParamTensor:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[ParamTensor]:
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> Tuple[str, ...]:
        return tuple(self._params)

    def leaves(self) -> Dict[str, Tensor]:
        """Fresh differentiable leaves wrapping the current values."""
        return {p.name: Tensor.leaf(p.values, p.name) for p in self}

    def constants(self) -> Dict[str, Tensor]:
        """Non-differentiable views of the current values, for inference."""
        return {p.name: Tensor(p.values, op="param", name=p.name) for p in self}

    def astype(self, dtype: np.dtype) -> "ParamStore":
        """Deep copy with every parameter cast to ``dtype``."""
        store = ParamStore()
        for p in self:
            store.add(p.name, p.values.astype(dtype, copy=True))
        return store

    def zero_grad(self) -> None:
        for p in self:
            p.zero_grad()

    def accumulate(self, grads: Mapping[str, np.ndarray]) -> None:
        """Add gradients in parameter order, so summation is deterministic."""
        for p in self:
            if p.name in grads:
                p.grad += grads[p.name].astype(p.grad.dtype, copy=False)
