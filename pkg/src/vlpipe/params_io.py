"""Binary round-trip format for named float64 arrays.

A parameter file is a flat, ordered list of named arrays.  Byte layout
(all integers little-endian, payloads row-major float64 little-endian):

    offset 0   magic, 8 bytes: b"NAMEDF64"
    u32        N, number of arrays
    N records, each:
        u16    name length L in bytes
        L      UTF-8 name
        u8     ndim
        ndim   u32 dimensions
        8*prod(dims) bytes of float64 payload

Any language with a struct reader can round-trip the format; order is
preserved so checkpoints compare byte-for-byte.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NAMEDF64"


def save_params(path, arrays: dict[str, np.ndarray]) -> None:
    """Write an ordered name -> array mapping; arrays are stored as float64."""
    chunks = [MAGIC, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype=np.float64)
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"array name too long: {name[:40]}...")
        if arr.ndim > 0xFF:
            raise ValueError(f"too many dimensions: {arr.ndim}")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_params(path) -> dict[str, np.ndarray]:
    """Read a parameter file back into an ordered name -> array mapping."""
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not a parameter file (bad magic)")
    offset = 8
    (count,) = struct.unpack_from("<I", data, offset)
    offset += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        payload = np.frombuffer(data, dtype="<f8", count=size, offset=offset)
        offset += 8 * size
        out[name] = payload.reshape(shape).astype(np.float64)
    if offset != len(data):
        raise ValueError(f"{path}: {len(data) - offset} trailing bytes")
    return out
