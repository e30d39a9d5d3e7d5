"""Raw float32 array files.

Layout: 8-byte magic ``EDCNET01``, three little-endian uint64 dimensions,
then ``prod(dims)`` little-endian float32 values in row-major order. Arrays
with fewer than three dimensions are padded with leading ones.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeMismatchError, TruncatedFileError

MAGIC = b"EDCNET01"
_HEADER = struct.Struct("<8sQQQ")


def write_array(path, array):
    arr = np.asarray(array, dtype="<f4")
    if arr.ndim > 3:
        raise ShapeMismatchError(f"at most 3 dimensions supported, got shape {arr.shape}")
    dims = (1,) * (3 - arr.ndim) + arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *dims))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_array(path, expected_dims=None):
    """Read an array written by :func:`write_array`; returns shape ``dims``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        if raw[:8] != MAGIC[: len(raw[:8])]:
            raise FormatError(f"{path}: bad magic bytes")
        raise TruncatedFileError(f"{path}: header truncated ({len(raw)} bytes)")
    magic, d0, d1, d2 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic bytes {magic!r}")
    dims = (d0, d1, d2)
    if expected_dims is not None and tuple(expected_dims) != dims:
        raise ShapeMismatchError(f"{path}: dims {dims} do not match expected {tuple(expected_dims)}")
    n = d0 * d1 * d2
    body = raw[_HEADER.size:]
    if len(body) < 4 * n:
        raise TruncatedFileError(f"{path}: expected {4 * n} data bytes, found {len(body)}")
    if len(body) > 4 * n:
        raise FormatError(f"{path}: {len(body) - 4 * n} trailing bytes")
    return np.frombuffer(body, dtype="<f4").reshape(dims).astype(np.float32)
