"""Bit-exact feature file codec.

Layout, little-endian: magic ``CPLF``, u32 version (1), u32 n_raw, u32 d,
then n_raw*d float32 values in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from ..exceptions import (
    BadMagicError,
    DataError,
    DimensionOverflowError,
    FeatureFormatError,
    MissingFileError,
    NonFiniteError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .models import FeatureSequence

MAGIC = b"CPLF"
VERSION = 1
HEADER = struct.Struct("<4sIII")
MAX_ELEMENTS = 2**31 - 1
U32_MAX = 2**32 - 1


def encode_features(features: np.ndarray) -> bytes:
    """Serialize an n_raw x d matrix."""
    features = np.asarray(features)
    if features.ndim != 2:
        raise DimensionOverflowError(f"Features must be a matrix, got {features.shape}")
    n_raw, dim = features.shape
    if not (0 < n_raw <= U32_MAX and 0 < dim <= U32_MAX) or n_raw * dim > MAX_ELEMENTS:
        raise DimensionOverflowError(f"Unsupported feature shape {features.shape}")
    if not np.all(np.isfinite(features)):
        raise NonFiniteError("Feature matrix contains non-finite values", op="write")
    payload = np.ascontiguousarray(features, dtype="<f4").tobytes()
    return HEADER.pack(MAGIC, VERSION, n_raw, dim) + payload


def decode_features(blob: bytes, path: str = "<memory>") -> np.ndarray:
    """Parse a feature file, raising a distinct error per failure mode."""
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(
            f"{path}: header needs {HEADER.size} bytes, got {len(blob)}",
            expected=HEADER.size,
            actual=len(blob),
            path=path,
        )
    magic, version, n_raw, dim = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(
            f"{path}: bad magic {magic!r}, expected {MAGIC!r}", path=path
        )
    if version != VERSION:
        raise VersionMismatchError(
            f"{path}: version {version} is not supported (expected {VERSION})",
            path=path,
        )
    if n_raw == 0 or dim == 0 or n_raw * dim > MAX_ELEMENTS:
        raise DimensionOverflowError(
            f"{path}: header dimensions n={n_raw}, d={dim} out of range", path=path
        )
    expected = n_raw * dim * 4
    actual = len(blob) - HEADER.size
    if actual < expected:
        raise TruncatedPayloadError(
            f"{path}: payload has {actual} bytes, expects {expected}",
            expected=expected,
            actual=actual,
            path=path,
        )
    if actual > expected:
        raise FeatureFormatError(
            f"{path}: {actual - expected} trailing bytes after payload", path=path
        )
    values = np.frombuffer(blob, dtype="<f4", count=n_raw * dim, offset=HEADER.size)
    return values.astype(np.float32).reshape(n_raw, dim)


def write_features(path: Path, seq: FeatureSequence) -> None:
    """Write the feature matrix of ``seq``; labels live in the manifest."""
    path = Path(path)
    blob = encode_features(seq.features)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(blob)
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e}", path=str(path)) from e


def read_features(path: Path) -> FeatureSequence:
    """Read a feature file; the video id defaults to the file stem."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Feature file not found: {path}", path=str(path))
    return FeatureSequence(
        video_id=path.stem, features=decode_features(path.read_bytes(), str(path))
    )


def write_gt(path: Path, gt_frames: np.ndarray) -> None:
    """One integer category id per line, one line per snippet."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{int(v)}\n" for v in gt_frames), encoding="utf-8")


def read_gt(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"GT file not found: {path}", path=str(path))
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    try:
        return np.array([int(line) for line in lines if line], dtype=np.int64)
    except ValueError as e:
        raise DataError(f"{path}: GT lines must be integers", path=str(path)) from e
