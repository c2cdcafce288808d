"""Binary checkpoint format for a ParamStore.

Layout, little-endian: magic ``CPLP``, u32 version, u32 count, then per
parameter: u16 name length, UTF-8 name, u8 rank, u32 per dimension and the
float32 payload in row-major order.
"""

import struct
from pathlib import Path

import numpy as np

from ..exceptions import (
    BadMagicError,
    DimensionOverflowError,
    FeatureFormatError,
    MissingFileError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from .params import ParamStore

MAGIC = b"CPLP"
VERSION = 1


def encode_checkpoint(params: ParamStore) -> bytes:
    chunks = [struct.pack("<4sII", MAGIC, VERSION, len(params))]
    for p in params:
        name = p.name.encode("utf-8")
        if len(name) > 0xFFFF or p.values.ndim > 0xFF:
            raise DimensionOverflowError(f"Parameter '{p.name}' cannot be encoded")
        chunks.append(struct.pack("<H", len(name)) + name)
        chunks.append(struct.pack(f"<B{p.values.ndim}I", p.values.ndim, *p.shape))
        chunks.append(np.ascontiguousarray(p.values, dtype="<f4").tobytes())
    return b"".join(chunks)


def decode_checkpoint(blob: bytes, path: str = "<memory>") -> ParamStore:
    if len(blob) < 12:
        raise TruncatedPayloadError(
            f"{path}: checkpoint header truncated",
            expected=12,
            actual=len(blob),
            path=path,
        )
    magic, version, count = struct.unpack_from("<4sII", blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}", path=path)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}", path=path)

    store = ParamStore()
    offset = 12
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
        except struct.error as e:
            raise TruncatedPayloadError(f"{path}: truncated entry", path=path) from e
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        end = offset + 4 * size
        if end > len(blob):
            raise TruncatedPayloadError(
                f"{path}: parameter '{name}' expects {4 * size} bytes",
                expected=4 * size,
                actual=len(blob) - offset,
                path=path,
            )
        values = np.frombuffer(blob, dtype="<f4", count=size, offset=offset)
        store.add(name, values.astype(np.float32).reshape(shape))
        offset = end
    if offset != len(blob):
        raise FeatureFormatError(
            f"{path}: {len(blob) - offset} trailing bytes", path=path
        )
    return store


def write_checkpoint(path: Path, params: ParamStore) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(params))


def read_checkpoint(path: Path) -> ParamStore:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"Checkpoint not found: {path}", path=str(path))
    return decode_checkpoint(path.read_bytes(), path=str(path))
