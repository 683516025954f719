"""Binary checkpoint container.

Layout (little-endian)::

    magic  b"MSCK"
    u16    format version
    u32    config length, then that many bytes of UTF-8 JSON
    u32    number of parameter records
    per record:
        u16 name length, name (UTF-8)
        u8  rank, rank x u32 dims
        float64 payload, row-major
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .._errors import DomainError

MAGIC = b"MSCK"
VERSION = 1


def dumps_checkpoint(config: dict, params: dict[str, np.ndarray]) -> bytes:
    cfg = json.dumps(config, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<HI", VERSION, len(cfg)), cfg, struct.pack("<I", len(params))]
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        key = name.encode()
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads_checkpoint(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        return _decode(blob)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, DomainError):
            raise
        raise DomainError(f"corrupt checkpoint: {exc}") from None


def _decode(blob: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if blob[:4] != MAGIC:
        raise DomainError("not a checkpoint file (bad magic)")
    version, cfg_len = struct.unpack_from("<HI", blob, 4)
    if version != VERSION:
        raise DomainError(f"unsupported checkpoint version {version}")
    pos = 10
    config = json.loads(blob[pos:pos + cfg_len].decode())
    pos += cfg_len
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + nlen].decode()
        pos += nlen
        (rank,) = struct.unpack_from("<B", blob, pos)
        dims = struct.unpack_from(f"<{rank}I", blob, pos + 1)
        pos += 1 + 4 * rank
        size = int(np.prod(dims, dtype=np.int64)) * 8
        params[name] = np.frombuffer(blob, dtype="<f8", count=size // 8, offset=pos).reshape(dims).astype(np.float64)
        pos += size
    if pos != len(blob):
        raise DomainError(f"trailing bytes in checkpoint ({len(blob) - pos})")
    return config, params


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_checkpoint(path, config: dict, params: dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dumps_checkpoint(config, params))


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    return loads_checkpoint(Path(path).read_bytes())
