"""Flat binary checkpoint format for named float64 parameter arrays.

Layout (all integers little-endian u32):

    magic "CMCL" | version | repeated records until EOF
    record: name_length | name (UTF-8) | rank | dims... | row-major f64 payload
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ContractViolationError
from .tensor import Array, Tensor

MAGIC = b"CMCL"
VERSION = 1


def save_checkpoint(path: str | Path, params: dict[str, Tensor | Array]) -> None:
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    for name, value in params.items():
        data = value.data if isinstance(value, Tensor) else np.asarray(value)
        data = np.ascontiguousarray(data, dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> dict[str, Array]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ContractViolationError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ContractViolationError(f"{path}: unsupported checkpoint version {version}")
    params: dict[str, Array] = {}
    offset = 8
    end = len(raw)
    while offset < end:
        try:
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            dims = struct.unpack_from(f"<{rank}I", raw, offset)
            offset += 4 * rank
            count = int(np.prod(dims)) if rank else 1
            payload = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
            offset += 8 * count
        except (struct.error, ValueError) as err:
            raise ContractViolationError(f"{path}: truncated checkpoint ({err})") from err
        if payload.size != count:
            raise ContractViolationError(f"{path}: truncated payload for '{name}'")
        params[name] = payload.reshape(dims).astype(np.float64)
    return params
