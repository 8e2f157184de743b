"""Checkpoint file format.

Layout (all integers little-endian):

  magic   4 bytes  b"DCGN"
  version u32      currently 1
  meta    u32 length + utf-8 ``key=value`` lines (model/run config)
  count   u32      number of parameter records
  records, in declaration order:
      name  u16 length + utf-8 bytes
      dtype 2 bytes  b"f4" | b"f8"
      ndim  u8, then ndim x u32 dims
      raw little-endian scalars

Round-trips are bitwise exact.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

MAGIC = b"DCGN"
VERSION = 1

_DTYPE_CODES = {np.dtype("float32"): b"f4", np.dtype("float64"): b"f8"}
_CODE_DTYPES = {b"f4": np.dtype("<f4"), b"f8": np.dtype("<f8")}


def save_checkpoint(path, arrays, meta: dict):
    """arrays: iterable of (name, numpy array); meta: flat str->str mapping."""
    arrays = list(arrays)
    meta_blob = "".join(f"{k}={v}\n" for k, v in meta.items()).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays:
            nb = name.encode()
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            code = _DTYPE_CODES.get(arr.dtype)
            if code is None:
                raise ConfigurationError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
            fh.write(code)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path):
    """Returns (meta dict, list of (name, array) in file order)."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ConfigurationError(f"{path}: not a checkpoint file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", raw, 8)
    pos = 12
    meta = {}
    for line in raw[pos : pos + meta_len].decode().splitlines():
        k, _, v = line.partition("=")
        meta[k] = v
    pos += meta_len
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    arrays = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos : pos + nlen].decode()
        pos += nlen
        code = raw[pos : pos + 2]
        pos += 2
        dtype = _CODE_DTYPES[code]
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, pos)
        pos += 4 * ndim
        nbytes = int(np.prod(shape)) * dtype.itemsize if ndim else dtype.itemsize
        arr = np.frombuffer(raw, dtype=dtype, count=max(1, int(np.prod(shape))), offset=pos)
        arr = arr.reshape(shape).astype(dtype.newbyteorder("="))
        pos += nbytes
        arrays.append((name, arr))
    return meta, arrays
