"""
Versioned binary checkpoints.

Layout (little-endian):
    b"PRFL" | u32 version | u32 meta_len | meta (UTF-8 JSON, sorted keys) | u32 count |
    count x [ u32 name_len | name | u32 ndim | ndim x u32 extent | u8 trainable | f64 data ]
"""
import json
import logging
import os
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .. import config
from ..errors import CheckpointError
from .params import ModelParams

logger = logging.getLogger(__name__)


def to_bytes(params: ModelParams, meta: Optional[Dict[str, Any]] = None) -> bytes:
    meta_blob = json.dumps(meta or {}, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = [config.CHECKPOINT_MAGIC, struct.pack("<II", config.CHECKPOINT_VERSION, len(meta_blob)), meta_blob]
    out.append(struct.pack("<I", len(params)))
    for name in params:
        arr = params[name]
        encoded = name.encode("utf-8")
        out.append(struct.pack("<I", len(encoded)))
        out.append(encoded)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        out.append(struct.pack("<B", 1 if params.is_trainable(name) else 0))
        out.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(out)


def from_bytes(blob: bytes, source: str = "<bytes>") -> Tuple[ModelParams, Dict[str, Any]]:
    view = memoryview(blob)
    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(view):
            raise CheckpointError("truncated checkpoint", source)
        chunk = bytes(view[pos:pos + n])
        pos += n
        return chunk

    if take(4) != config.CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic, not a checkpoint", source)
    version, meta_len = struct.unpack("<II", take(8))
    if version != config.CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", source)
    try:
        meta = json.loads(take(meta_len).decode("utf-8"))
    except ValueError:
        raise CheckpointError("corrupt metadata block", source)

    (count,) = struct.unpack("<I", take(4))
    tensors, trainable = {}, {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        (flag,) = struct.unpack("<B", take(1))
        n = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(take(8 * n), dtype="<f8").astype(np.float64).reshape(shape)
        tensors[name] = data
        trainable[name] = bool(flag)
    if pos != len(view):
        raise CheckpointError("trailing bytes after last record", source)
    return ModelParams(tensors, trainable), meta


def save_checkpoint(params: ModelParams, path, meta: Optional[Dict[str, Any]] = None) -> Path:
    """Writes atomically through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(to_bytes(params, meta))
    os.replace(tmp, path)
    logger.info(f"Saved checkpoint {path.name} ({len(params)} tensors)")
    return path


def load_checkpoint(path) -> Tuple[ModelParams, Dict[str, Any]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError("checkpoint not found", str(path))
    return from_bytes(path.read_bytes(), str(path))
