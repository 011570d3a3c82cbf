"""Versioned binary checkpoint container.

Layout: magic `AQCF`, version u32, u64 JSON metadata length + UTF-8 JSON
(config echo, vocab, counters, RNG state, optimizer step), u32 tensor count,
then length-prefixed named tensors (u16 name length + name, u8 dtype tag,
u8 rank, u64 dims, raw little-endian float64 data).  Raw doubles guarantee
bit-exact round trips.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .model import AqcfModel, ModelConfig

MAGIC = b"AQCF"
VERSION = 1
_DTYPE_F64 = 0


def _write_tensor(fh, name: str, array: np.ndarray):
    encoded = name.encode("utf-8")
    fh.write(struct.pack("<H", len(encoded)))
    fh.write(encoded)
    fh.write(struct.pack("<BB", _DTYPE_F64, array.ndim))
    fh.write(struct.pack(f"<{max(array.ndim, 0)}Q", *array.shape))
    fh.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_tensor(fh) -> Tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<H", fh.read(2))
    name = fh.read(name_len).decode("utf-8")
    dtype_tag, ndim = struct.unpack("<BB", fh.read(2))
    if dtype_tag != _DTYPE_F64:
        raise ConfigError(f"unsupported tensor dtype tag {dtype_tag}")
    shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(np.float64)
    return name, data.reshape(shape)


def save_checkpoint(path: str, model: AqcfModel, meta: Optional[dict] = None,
                    optimizer_state: Optional[Dict[str, np.ndarray]] = None):
    meta = dict(meta or {})
    meta["model_config"] = dataclasses.asdict(model.cfg)
    tensors = {name: p.data for name, p in model.parameters().items()}
    if optimizer_state:
        tensors.update(optimizer_state)
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            _write_tensor(fh, name, tensors[name])


def load_checkpoint(path: str) -> Tuple[AqcfModel, dict, Dict[str, np.ndarray]]:
    """Rebuild the model from a checkpoint; returns (model, meta, extra tensors)."""
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ConfigError(f"{path} is not a checkpoint (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise ConfigError(f"unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<Q", fh.read(8))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = dict(_read_tensor(fh) for _ in range(count))

    cfg = ModelConfig(**meta["model_config"])
    model = AqcfModel(cfg, seed=int(meta.get("init_seed", 0)))
    params = model.parameters()
    extra: Dict[str, np.ndarray] = {}
    for name, array in tensors.items():
        if name in params:
            if params[name].data.shape != array.shape:
                raise ConfigError(
                    f"checkpoint tensor {name} has shape {array.shape}, "
                    f"model expects {params[name].data.shape}")
            params[name].data = array.copy()
        else:
            extra[name] = array
    missing = set(params) - set(tensors)
    if missing:
        raise ConfigError(f"checkpoint is missing tensors: {sorted(missing)[:5]}")
    return model, meta, extra
