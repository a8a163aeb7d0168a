"""Binary container for named tensors (model checkpoints).

Layout, all integers little-endian:

    magic   5 bytes  b"LRES1"
    count   u32      number of records
    record:
        name_len  u16
        name      utf-8 bytes
        dtype     u8   tag (see _TAGS)
        ndim      u8
        dims      ndim * u32
        payload   C-order little-endian array bytes

Round-trips are bit-exact: payloads are written untouched from (and read
back into) native little-endian arrays.
"""
from __future__ import annotations

import struct
from collections import OrderedDict

import numpy as np

from ..errors import DataError

MAGIC = b"LRES1"

_TAGS = {
    np.dtype("<f4"): 1,
    np.dtype("<f8"): 2,
    np.dtype("<i8"): 3,
    np.dtype("<i4"): 4,
    np.dtype("uint8"): 5,
}
_DTYPES = {v: k for k, v in _TAGS.items()}


def save_arrays(path, arrays: "OrderedDict[str, np.ndarray] | dict") -> None:
    """Write named arrays to ``path`` in insertion order."""
    chunks = [MAGIC, struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        le = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        arr = arr.astype(le, copy=False)
        tag = _TAGS.get(arr.dtype)
        if tag is None:
            raise DataError(f"checkpoint: unsupported dtype {arr.dtype} for tensor {name!r}")
        nb = name.encode("utf-8")
        if len(nb) > 0xFFFF:
            raise DataError(f"checkpoint: tensor name too long ({len(nb)} bytes)")
        if arr.ndim > 0xFF:
            raise DataError(f"checkpoint: tensor rank {arr.ndim} too large")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", tag, arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_arrays(path) -> "OrderedDict[str, np.ndarray]":
    """Read a container written by save_arrays, preserving record order."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 or blob[: len(MAGIC)] != MAGIC:
        raise DataError(f"checkpoint: bad magic in {path}")
    off = len(MAGIC)
    (count,) = struct.unpack_from("<I", blob, off)
    off += 4
    out: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<H", blob, off)
            off += 2
            name = blob[off : off + name_len].decode("utf-8")
            off += name_len
            tag, ndim = struct.unpack_from("<BB", blob, off)
            off += 2
            shape = struct.unpack_from(f"<{ndim}I", blob, off)
            off += 4 * ndim
        except struct.error as exc:
            raise DataError(f"checkpoint: truncated header in {path}") from exc
        dtype = _DTYPES.get(tag)
        if dtype is None:
            raise DataError(f"checkpoint: unknown dtype tag {tag} for tensor {name!r}")
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        nbytes = n * dtype.itemsize
        if off + nbytes > len(blob):
            raise DataError(f"checkpoint: truncated payload for tensor {name!r} in {path}")
        arr = np.frombuffer(blob, dtype=dtype, count=n, offset=off).reshape(shape).copy()
        off += nbytes
        out[name] = arr
    return out
