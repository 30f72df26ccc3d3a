"""Standalone FMNW container reader/writer.

Implemented from the documented byte layout, independently of the
inference toolkit, so the two ends of the format are cross-checked:
magic `FMNW`, u32 version 1, u32 count; per tensor u16 name length,
UTF-8 name, u8 dtype (0 = f32), u8 ndim, ndim x u32 dims, u64 offset
into a 64-byte-aligned raw float32 data section. Little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FMNW"
VERSION = 1
ALIGN = 64


class FmnwError(ValueError):
    pass


def write_fmnw(path, tensors: dict[str, np.ndarray]) -> None:
    entries = []
    offset = 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(arr, dtype="<f4")
        if not np.all(np.isfinite(a)):
            raise FmnwError(f"tensor {name!r} contains non-finite values")
        entries.append((name.encode("utf-8"), a, offset))
        offset += a.size * 4

    header = bytearray()
    header += MAGIC
    header += struct.pack("<II", VERSION, len(entries))
    for bname, a, off in entries:
        header += struct.pack("<H", len(bname))
        header += bname
        header += struct.pack("<BB", 0, a.ndim)
        header += struct.pack(f"<{a.ndim}I", *a.shape)
        header += struct.pack("<Q", off)
    header += b"\x00" * ((-len(header)) % ALIGN)

    with open(path, "wb") as fp:
        fp.write(header)
        for _, a, _ in entries:
            fp.write(a.tobytes())


def read_fmnw(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise FmnwError(f"{path}: bad magic")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise FmnwError(f"{path}: unsupported version {version}")
    pos = 12
    metas = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        dtype, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        if dtype != 0:
            raise FmnwError(f"{path}: tensor {name!r} has dtype {dtype}")
        dims = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        (off,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        metas.append((name, dims, off))
    data_start = pos + ((-pos) % ALIGN)
    out = {}
    for name, dims, off in metas:
        n = int(np.prod(dims)) if dims else 1
        start = data_start + off
        if start + 4 * n > len(blob):
            raise FmnwError(f"{path}: tensor {name!r} truncated")
        out[name] = np.frombuffer(blob[start : start + 4 * n], dtype="<f4").reshape(dims).copy()
    return out
