"""Minimal binary container for dense numeric arrays.

Byte layout (all little-endian):

    magic(8) = b"DEPSEG01" | dtype(1: 0=f32, 1=u8, 2=u16) | rank(1)
    | shape(rank x u32) | payload(row-major values)

The same bytes are produced and consumed on both sides of the exporter
boundary, so round-trips must be bit-exact.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"DEPSEG01"
MAX_RANK = 4

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("uint8"): 1,
    np.dtype("<u2"): 2,
}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("uint8"), 2: np.dtype("<u2")}


class TensorFormatError(ValueError):
    """File does not parse as a tensor container."""


class BadMagicError(TensorFormatError):
    pass


class UnknownDtypeError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


def write_tensor(t: np.ndarray, path) -> None:
    """Serialize ``t`` to ``path``. dtype must be f32, u8, or u16."""
    t = np.ascontiguousarray(t)
    dt = t.dtype.newbyteorder("<") if t.dtype.kind == "f" or t.itemsize > 1 else t.dtype
    dt = np.dtype(dt)
    if dt not in _DTYPE_CODES:
        raise UnknownDtypeError(f"unsupported dtype {t.dtype}")
    if t.ndim == 0 or t.ndim > MAX_RANK:
        raise ValueError(f"rank must be 1..{MAX_RANK}, got {t.ndim}")
    if any(d <= 0 for d in t.shape):
        raise ValueError(f"all dims must be > 0, got shape {t.shape}")
    if any(d > 0xFFFFFFFF for d in t.shape):
        raise ValueError("dimension overflow (> u32)")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BB", _DTYPE_CODES[dt], t.ndim))
        f.write(struct.pack(f"<{t.ndim}I", *t.shape))
        f.write(t.astype(dt, copy=False).tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor written by :func:`write_tensor`."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < len(MAGIC) + 2:
        raise TruncatedPayloadError(f"{path}: file shorter than header")
    if data[:8] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:8]!r}")
    code, rank = struct.unpack_from("<BB", data, 8)
    if code not in _CODE_DTYPES:
        raise UnknownDtypeError(f"{path}: unknown dtype code {code}")
    if rank == 0 or rank > MAX_RANK:
        raise TensorFormatError(f"{path}: bad rank {rank}")
    off = 10
    if len(data) < off + 4 * rank:
        raise TruncatedPayloadError(f"{path}: truncated shape")
    shape = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    dt = _CODE_DTYPES[code]
    nbytes = int(np.prod(shape)) * dt.itemsize
    if len(data) - off < nbytes:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(data) - off} bytes, expected {nbytes}"
        )
    return np.frombuffer(data[off : off + nbytes], dtype=dt).reshape(shape).copy()
