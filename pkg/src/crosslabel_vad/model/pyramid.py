"""Multi-scale temporal encoder.

Level 1 is the projected input mixed by one residual block at length ``n``.
Each further level average-pools the previous one with stride 2 and applies
another residual block::

    block(h) = h + gelu(dwconv3(h)) @ W + b

``dwconv3`` is a width-3 depthwise temporal convolution with replicate-edge
padding (circular padding is available for equivariance checks). Temporal
shifts, pooling and interpolation are expressed as constant matrices so every
step reuses the differentiable ``matmul``.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Mapping, Optional

import numpy as np

from ..diffcore import ParamStore, Tensor
from ..diffcore import ops
from ..exceptions import ConfigError, NonFiniteError, ShapeMismatchError


@dataclass
class ScorePyramid:
    """Per-level matrices of shape ``t_i x w`` with ``t_{i+1} = t_i / 2``."""

    levels: List[np.ndarray]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ShapeMismatchError("A pyramid needs at least one level", op="pyramid")
        for i in range(1, len(self.levels)):
            if self.levels[i].shape[0] * 2 != self.levels[i - 1].shape[0]:
                raise ShapeMismatchError(
                    f"Level {i + 1} has length {self.levels[i].shape[0]}, "
                    f"expected {self.levels[i - 1].shape[0] // 2}",
                    op="pyramid",
                )
        for i, level in enumerate(self.levels, 1):
            if not np.all(np.isfinite(level)):
                raise NonFiniteError(f"Level {i} has non-finite entries", op="pyramid")

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def level_lengths(self) -> List[int]:
        return [int(level.shape[0]) for level in self.levels]

    @classmethod
    def from_tensors(cls, tensors: List[Tensor]) -> "ScorePyramid":
        return cls([t.data.copy() for t in tensors])


def level_lengths(n: int, levels: int) -> List[int]:
    check_length(n, levels)
    return [n // 2**i for i in range(levels)]


def check_length(n: int, levels: int) -> None:
    stride = 2 ** (levels - 1)
    if n <= 0 or n % stride:
        raise ConfigError(
            f"n={n} must be a positive multiple of 2^(L-1)={stride}", key="n"
        )


# ---------------------------------------------------------------------------
# Constant operators


@lru_cache(maxsize=256)
def interpolation_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Linear interpolation with both endpoints pinned (``n_out x n_in``)."""
    matrix = np.zeros((n_out, n_in), dtype=np.float64)
    if n_in == 1:
        matrix[:, 0] = 1.0
    elif n_out == 1:
        matrix[0, 0] = 1.0
    else:
        positions = np.arange(n_out) * (n_in - 1) / (n_out - 1)
        lower = np.minimum(np.floor(positions).astype(int), n_in - 2)
        frac = positions - lower
        rows = np.arange(n_out)
        matrix[rows, lower] = 1.0 - frac
        matrix[rows, lower + 1] += frac
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=64)
def shift_matrix(t: int, offset: int, circular: bool = False) -> np.ndarray:
    """Row ``j`` selects snippet ``j + offset``, clamped or wrapped at the edges."""
    index = np.arange(t) + offset
    index = np.mod(index, t) if circular else np.clip(index, 0, t - 1)
    matrix = np.zeros((t, t), dtype=np.float64)
    matrix[np.arange(t), index] = 1.0
    matrix.setflags(write=False)
    return matrix


@lru_cache(maxsize=64)
def pool_matrix(t: int) -> np.ndarray:
    """Stride-2 average pooling from ``t`` to ``t // 2`` snippets."""
    matrix = np.zeros((t // 2, t), dtype=np.float64)
    rows = np.arange(t // 2)
    matrix[rows, 2 * rows] = 0.5
    matrix[rows, 2 * rows + 1] = 0.5
    matrix.setflags(write=False)
    return matrix


def _const(matrix: np.ndarray, like: Tensor) -> Tensor:
    return Tensor.const(matrix, dtype=like.dtype)


def resample_to_n(seq: np.ndarray, n: int, levels: Optional[int] = None) -> np.ndarray:
    """Linearly resample an ``n_raw x d`` matrix along time to ``n`` rows."""
    if levels is not None:
        check_length(n, levels)
    elif n <= 0:
        raise ConfigError(f"n={n} must be positive", key="n")
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[0] < 1:
        raise ShapeMismatchError(
            f"Expected an n_raw x d matrix with n_raw >= 1, got {seq.shape}",
            op="resample_to_n",
        )
    if seq.shape[0] == n:
        return seq.copy()
    return (interpolation_matrix(n, seq.shape[0]) @ seq).astype(seq.dtype)


def resample_labels(labels: np.ndarray, n: int) -> np.ndarray:
    """Nearest-index resampling of integer frame labels to length ``n``."""
    labels = np.asarray(labels)
    if labels.shape[0] == n:
        return labels.copy()
    return labels[np.argmax(interpolation_matrix(n, labels.shape[0]), axis=1)]


def upsample(level: Tensor, n: int) -> Tensor:
    """Differentiable linear interpolation of a ``t x w`` level to ``n`` rows."""
    if level.shape[0] == n:
        return level
    return _const(interpolation_matrix(n, level.shape[0]), level) @ level


# ---------------------------------------------------------------------------
# Parameters


def init_encoder(
    store: ParamStore,
    d_in: int,
    d: int,
    levels: int,
    rng: np.random.Generator,
    identity: bool = False,
) -> None:
    """Register encoder parameters under ``enc.*``.

    With ``identity=True`` (requires ``d_in == d``) the projection is the
    identity and every block is the identity map.
    """
    if identity:
        if d_in != d:
            raise ShapeMismatchError(
                f"Identity encoder needs d_in == d, got {d_in} and {d}",
                op="init_encoder",
            )
        store.add("enc.proj.w", np.eye(d, dtype=np.float32))
    else:
        store.add(
            "enc.proj.w",
            rng.normal(0.0, 1.0 / np.sqrt(d_in), size=(d_in, d)).astype(np.float32),
        )
    store.add("enc.proj.b", np.zeros((1, d), dtype=np.float32))
    for i in range(1, levels + 1):
        for tap in ("prev", "mid", "next"):
            kernel = (
                np.zeros((1, d))
                if identity
                else rng.normal(0.0, 1.0 / np.sqrt(3.0), size=(1, d))
            )
            store.add(f"enc.l{i}.k_{tap}", kernel.astype(np.float32))
        w = np.zeros((d, d)) if identity else rng.normal(0.0, 0.5 / np.sqrt(d), (d, d))
        store.add(f"enc.l{i}.w", w.astype(np.float32))
        store.add(f"enc.l{i}.b", np.zeros((1, d), dtype=np.float32))


def encoder_width(p: Mapping[str, Tensor]) -> int:
    return int(p["enc.proj.w"].shape[1])


# ---------------------------------------------------------------------------
# Forward


def depthwise_conv3(
    h: Tensor, k_prev: Tensor, k_mid: Tensor, k_next: Tensor, circular: bool = False
) -> Tensor:
    t = h.shape[0]
    before = _const(shift_matrix(t, -1, circular), h) @ h
    after = _const(shift_matrix(t, 1, circular), h) @ h
    return before * k_prev + h * k_mid + after * k_next


def residual_block(
    h: Tensor, p: Mapping[str, Tensor], level: int, circular: bool = False
) -> Tensor:
    prefix = f"enc.l{level}"
    mixed = depthwise_conv3(
        h, p[f"{prefix}.k_prev"], p[f"{prefix}.k_mid"], p[f"{prefix}.k_next"], circular
    )
    return h + ops.gelu(mixed) @ p[f"{prefix}.w"] + p[f"{prefix}.b"]


def encode_pyramid(
    features: np.ndarray,
    p: Mapping[str, Tensor],
    levels: int,
    circular: bool = False,
) -> List[Tensor]:
    """Encode ``n x d_in`` features into ``levels`` matrices of width ``d``."""
    w = p["enc.proj.w"]
    x = features if isinstance(features, Tensor) else Tensor.const(features, w.dtype)
    if x.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatchError(
            f"Encoder expects n x {w.shape[0]} features, got {x.shape}",
            op="encode_pyramid",
        )
    check_length(x.shape[0], levels)

    h = residual_block(x @ w + p["enc.proj.b"], p, 1, circular)
    pyramid = [h]
    for level in range(2, levels + 1):
        pooled = _const(pool_matrix(h.shape[0]), h) @ h
        h = residual_block(pooled, p, level, circular)
        pyramid.append(h)
    return pyramid
