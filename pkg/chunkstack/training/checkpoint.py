"""
Named-tensor checkpoint container.

Layout (all integers little-endian):

    magic      4 bytes  b"CKST"
    version    u32
    count      u32      number of tensors
    meta_len   u32      followed by meta_len bytes of UTF-8 JSON (sorted keys)
    count x:
        name_len u32, name (UTF-8)
        dtype    3 ASCII bytes, "f32" or "f64"
        rank     u32
        dims     rank x u64
        payload  prod(dims) little-endian floats, row-major
"""

import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from chunkstack.autodiff.tensor import dtype_tag
from chunkstack.model.config import ModelConfig
from chunkstack.model.hierarchical import HierarchicalModel

logger = logging.getLogger(__name__)

MAGIC = b"CKST"
FORMAT_VERSION = 1
_LE_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


def encode_checkpoint(tensors: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> bytes:
    meta = json.dumps(dict(metadata), sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, len(tensors), len(meta)), meta]
    for name, array in tensors.items():
        array = np.asarray(array)
        tag = dtype_tag(array.dtype)
        if array.dtype not in (np.float32, np.float64):
            raise ValueError(f"Checkpoint tensor {name} has unsupported dtype {array.dtype}")
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded_name)))
        parts.append(encoded_name)
        parts.append(tag.encode("ascii"))
        parts.append(struct.pack("<I", array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(np.ascontiguousarray(array, dtype=_LE_DTYPES[tag]).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes, source: str):
        self.blob = blob
        self.offset = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.blob):
            raise ValueError(f"{self.source}: truncated checkpoint at byte {self.offset}")
        chunk = self.blob[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(
    blob: bytes, source: str = "<bytes>"
) -> Tuple["OrderedDict[str, np.ndarray]", Dict[str, Any]]:
    reader = _Reader(blob, source)
    if reader.take(4) != MAGIC:
        raise ValueError(f"{source}: not a chunkstack checkpoint (bad magic)")
    version, count, meta_len = reader.unpack("<III")
    if version != FORMAT_VERSION:
        raise ValueError(f"{source}: unsupported checkpoint version {version}")
    metadata = json.loads(reader.take(meta_len).decode("utf-8"))
    tensors: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        name = reader.take(name_len).decode("utf-8")
        tag = reader.take(3).decode("ascii")
        if tag not in _LE_DTYPES:
            raise ValueError(f"{source}: tensor {name} has unknown dtype tag {tag!r}")
        (rank,) = reader.unpack("<I")
        dims = reader.unpack(f"<{rank}Q") if rank else ()
        dtype = _LE_DTYPES[tag]
        n_bytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
        array = np.frombuffer(reader.take(n_bytes), dtype=dtype).reshape(dims)
        tensors[name] = array.astype(dtype.newbyteorder("="), copy=True)
    if reader.offset != len(blob):
        raise ValueError(f"{source}: {len(blob) - reader.offset} trailing bytes after last tensor")
    return tensors, metadata


def save_checkpoint(
    path: Union[str, Path], tensors: Mapping[str, np.ndarray], metadata: Mapping[str, Any]
) -> None:
    Path(path).write_bytes(encode_checkpoint(tensors, metadata))
    logger.info(f"Saved checkpoint with {len(tensors)} tensors to {path}")


def load_checkpoint(
    path: Union[str, Path],
) -> Tuple["OrderedDict[str, np.ndarray]", Dict[str, Any]]:
    return decode_checkpoint(Path(path).read_bytes(), source=str(path))


def save_model(
    path: Union[str, Path], model: HierarchicalModel, extra: Optional[Mapping[str, Any]] = None
) -> None:
    """Write every parameter plus the model config (and ``extra`` metadata)."""
    metadata = dict(extra or {})
    metadata["model_config"] = model.config.model_dump(mode="json")
    save_checkpoint(path, model.state_dict(), metadata)


def load_model(path: Union[str, Path]) -> Tuple[HierarchicalModel, Dict[str, Any]]:
    """Rebuild a HierarchicalModel from a checkpoint written by ``save_model``."""
    tensors, metadata = load_checkpoint(path)
    if "model_config" not in metadata:
        raise ValueError(f"{path}: checkpoint carries no model_config metadata")
    config = ModelConfig.model_validate(metadata["model_config"])
    model = HierarchicalModel(config)
    model.load_state_dict(tensors)
    return model, metadata
