"""Binary checkpoint files.

Layout (all integers little-endian)::

    magic      8 bytes   b"SRWCKPT\\x01"
    version    uint32
    hdr_len    uint64
    header     hdr_len bytes of UTF-8 JSON:
               {"tensors": [{"name", "shape", "dtype", "offset", "count"}], "meta": {...}}
    payload    concatenated little-endian arrays, in header order

64-bit values round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"SRWCKPT\x01"
VERSION = 1
_DTYPES = {"f8": "<f8", "f4": "<f4"}


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], meta: dict | None = None) -> None:
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        code = "f4" if arr.dtype == np.float32 else "f8"
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "dtype": code,
                        "offset": offset, "count": int(arr.size)})
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(header)))
        fh.write(header)
        for raw in chunks:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if blob[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hdr_len = struct.unpack_from("<IQ", blob, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = len(MAGIC) + struct.calcsize("<IQ")
    header = json.loads(blob[start:start + hdr_len].decode())
    payload = memoryview(blob)[start + hdr_len:]
    tensors = {}
    for e in header["tensors"]:
        dt = np.dtype(_DTYPES[e["dtype"]])
        arr = np.frombuffer(payload, dtype=dt, count=e["count"], offset=e["offset"])
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(dt.newbyteorder("="), copy=True)
    return tensors, header["meta"]
