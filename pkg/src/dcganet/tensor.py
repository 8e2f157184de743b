"""Rank-4 tensor container in batch x channel x height x width layout.

Internally everything is a contiguous numpy array; ``Tensor4`` is the
validated boundary type used for IO (golden-file dumps, dataset batches)
and shape contracts. Numerical kernels operate on the raw ``.data``
arrays directly.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ShapeError

_MAGIC = b"T4\x00\x01"


class Tensor4:
    """Dense (n, c, h, w) tensor, float32 by default, float64 for verification."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.ndim != 4:
            raise ShapeError(f"Tensor4 requires rank 4, got rank {arr.ndim}")
        if any(d < 1 for d in arr.shape):
            ax = min(i for i, d in enumerate(arr.shape) if d < 1)
            raise ShapeError(f"Tensor4 axis {ax} has size {arr.shape[ax]}, must be >= 1")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = np.ascontiguousarray(arr)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def astype(self, dtype) -> "Tensor4":
        return Tensor4(self.data.astype(dtype))

    def __repr__(self):
        return f"Tensor4(shape={self.shape}, dtype={self.dtype})"

    def dump(self, path) -> None:
        """Binary dump: little-endian header of 4 u32 dims, then raw scalars.

        A short magic/dtype prefix makes files self-describing; the dims +
        raw-scalar layout is the golden-file contract.
        """
        n, c, h, w = self.shape
        code = b"f4" if self.dtype == np.float32 else b"f8"
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(code)
            fh.write(struct.pack("<4I", n, c, h, w))
            fh.write(self.data.astype(self.data.dtype.newbyteorder("<")).tobytes())

    @classmethod
    def load(cls, path) -> "Tensor4":
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise ShapeError(f"{path}: bad magic, not a Tensor4 dump")
        code = raw[4:6]
        dtype = np.dtype("<f4") if code == b"f4" else np.dtype("<f8")
        n, c, h, w = struct.unpack("<4I", raw[6:22])
        expect = n * c * h * w * dtype.itemsize
        body = raw[22:]
        if len(body) != expect:
            raise ShapeError(f"{path}: payload is {len(body)} bytes, header implies {expect}")
        arr = np.frombuffer(body, dtype=dtype).reshape(n, c, h, w)
        return cls(arr.astype(dtype.newbyteorder("=")))
