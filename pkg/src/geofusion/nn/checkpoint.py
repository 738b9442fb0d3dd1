"""Binary parameter container.

Layout (all integers little-endian):

    magic "PGRF" | u32 version | u32 entry count
    per entry: u16 name length + utf-8 name
               u8 dtype length + ascii numpy dtype string (e.g. "<f8")
               u8 ndim | ndim x u64 shape | raw C-order array bytes

Entries are written in sorted-name order, so identical contents always
produce identical bytes and write(read(p)) round-trips byte-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError

MAGIC = b"PGRF"
VERSION = 1


def write_container(path, arrays: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)  # keeps 0-d shape, unlike calling it blindly
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        name_b = name.encode("utf-8")
        dtype_b = arr.dtype.str.encode("ascii")
        chunks.append(struct.pack("<H", len(name_b)) + name_b)
        chunks.append(struct.pack("<B", len(dtype_b)) + dtype_b)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def read_container(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported container version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (dtype_len,) = struct.unpack_from("<B", data, offset)
            offset += 1
            dtype = np.dtype(data[offset : offset + dtype_len].decode("ascii"))
            offset += dtype_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}Q", data, offset)
            offset += 8 * ndim
            nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if ndim else dtype.itemsize
            raw = data[offset : offset + nbytes]
            if len(raw) != nbytes:
                raise FormatError(f"{path}: truncated payload for entry {name!r}")
            offset += nbytes
            out[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    except struct.error as exc:
        raise FormatError(f"{path}: truncated container ({exc})") from exc
    return out
