"""Forward/backward driver and finite-difference gradient verification."""

from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from ..exceptions import NonFiniteError, ShapeMismatchError
from .params import ParamStore
from .tensor import Tensor

ScalarFn = Callable[[Mapping[str, Tensor]], Tensor]


def forward_backward(
    fn: ScalarFn, params: ParamStore
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Evaluate ``fn`` on fresh leaves and return the loss and its gradients.

    ``fn`` receives a mapping from parameter name to leaf tensor and must
    return a scalar tensor. Gradients are returned per parameter name and are
    not written into ``params``, so independent calls can run concurrently.
    """
    leaves = params.leaves()
    loss = fn(leaves)
    if loss.data.size != 1:
        raise ShapeMismatchError(
            f"Loss must be scalar, got shape {loss.shape}", op="forward_backward"
        )
    loss.backward()
    grads = {
        name: leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for name, leaf in leaves.items()
    }
    return loss.item(), grads


def evaluate(fn: ScalarFn, params: ParamStore) -> float:
    """Evaluate ``fn`` without recording gradients."""
    return fn(params.constants()).item()


def grad_check(
    fn: ScalarFn,
    params: ParamStore,
    h: float = 1e-5,
    analytic: Optional[Mapping[str, np.ndarray]] = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The error at each coordinate is ``|a - c| / max(1, |c|)`` with ``c`` the
    central difference. ``params`` is cast to float64 before checking; pass
    ``analytic`` to verify externally supplied gradients instead of the ones
    ``forward_backward`` produces.
    """
    store = params.astype(np.dtype(np.float64))
    if analytic is None:
        _, analytic = forward_backward(fn, store)

    worst = 0.0
    for param in store:
        values = param.values
        grad = np.asarray(analytic[param.name], dtype=np.float64)
        flat = values.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + h
            upper = evaluate(fn, store)
            flat[i] = original - h
            lower = evaluate(fn, store)
            flat[i] = original
            if not (np.isfinite(upper) and np.isfinite(lower)):
                raise NonFiniteError(
                    f"Non-finite evaluation while perturbing '{param.name}'",
                    op="grad_check",
                )
            central = (upper - lower) / (2.0 * h)
            error = abs(grad.reshape(-1)[i] - central) / max(1.0, abs(central))
            worst = max(worst, float(error))
    return worst
