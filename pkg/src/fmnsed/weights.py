"""Named tensor storage and the FMNW binary weight container.

Container layout (all integers little-endian):

    magic   4 bytes  b"FMNW"
    u32     version (1)
    u32     tensor count
    per tensor, in order:
        u16     name length
        bytes   UTF-8 name
        u8      dtype (0 = float32)
        u8      ndim
        u32[n]  dims
        u64     byte offset into the data section
    data section, padded so it starts on a 64-byte file boundary,
    raw float32 values per tensor at its offset.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"FMNW"
VERSION = 1
DTYPE_F32 = 0
_ALIGN = 64

__all__ = ["WeightError", "WeightStore", "save_fmnw", "load_fmnw"]


class WeightError(ValueError):
    """A required parameter is missing or has the wrong shape."""

    def __init__(self, message: str, name: str = ""):
        super().__init__(message)
        self.name = name


class WeightStore:
    """Insertion-ordered map from parameter name to Tensor.

    Names are unique and every stored tensor is finite.
    """

    def __init__(self, tensors: dict[str, Tensor] | None = None):
        self._tensors: dict[str, Tensor] = {}
        if tensors:
            for name, t in tensors.items():
                self.add(name, t)

    def add(self, name: str, tensor) -> None:
        if name in self._tensors:
            raise WeightError(f"duplicate parameter name {name!r}", name)
        t = tensor if isinstance(tensor, Tensor) else Tensor(np.asarray(tensor, dtype=np.float32))
        if not np.all(np.isfinite(t.data)):
            raise WeightError(f"parameter {name!r} contains non-finite values", name)
        self._tensors[name] = t

    def get(self, name: str, shape: tuple[int, ...] | None = None) -> Tensor:
        try:
            t = self._tensors[name]
        except KeyError:
            raise WeightError(f"missing weight {name!r}", name) from None
        if shape is not None and t.shape != tuple(shape):
            raise WeightError(
                f"weight {name!r} has shape {t.shape}, expected {tuple(shape)}", name
            )
        return t

    def arr(self, name: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
        return self.get(name, shape).data

    def names(self) -> list[str]:
        return list(self._tensors)

    def total_floats(self) -> int:
        return sum(t.size for t in self._tensors.values())

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def __iter__(self):
        return iter(self._tensors)

    def items(self):
        return self._tensors.items()

    def save(self, path) -> None:
        save_fmnw(path, self)

    @classmethod
    def load(cls, path) -> "WeightStore":
        return load_fmnw(path)


def save_fmnw(path, store: WeightStore) -> None:
    """Write a WeightStore to the FMNW container format."""
    entries = []
    offset = 0
    for name, t in store.items():
        entries.append((name.encode("utf-8"), t, offset))
        offset += t.size * 4

    header = bytearray()
    header += MAGIC
    header += struct.pack("<II", VERSION, len(entries))
    for bname, t, off in entries:
        if len(bname) > 0xFFFF:
            raise WeightError("tensor name too long", bname.decode("utf-8", "replace"))
        header += struct.pack("<H", len(bname))
        header += bname
        header += struct.pack("<BB", DTYPE_F32, t.ndim)
        header += struct.pack(f"<{t.ndim}I", *t.shape)
        header += struct.pack("<Q", off)

    pad = (-len(header)) % _ALIGN
    header += b"\x00" * pad

    with open(path, "wb") as f:
        f.write(header)
        for _, t, _ in entries:
            f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_fmnw(path) -> WeightStore:
    """Read an FMNW container into a WeightStore."""
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise WeightError(f"{path}: not an FMNW file (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise WeightError(f"{path}: unsupported FMNW version {version}")
    pos = 12
    metas = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + nlen].decode("utf-8")
        pos += nlen
        dtype, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        if dtype != DTYPE_F32:
            raise WeightError(f"{path}: tensor {name!r} has unsupported dtype {dtype}", name)
        dims = struct.unpack_from(f"<{ndim}I", blob, pos)
        pos += 4 * ndim
        (off,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        metas.append((name, dims, off))
    data_start = pos + ((-pos) % _ALIGN)

    store = WeightStore()
    for name, dims, off in metas:
        n = int(np.prod(dims)) if dims else 1
        start = data_start + off
        end = start + n * 4
        if end > len(blob):
            raise WeightError(f"{path}: tensor {name!r} data truncated", name)
        arr = np.frombuffer(blob[start:end], dtype="<f4").reshape(dims)
        store.add(name, Tensor(arr.copy()))
    return store
