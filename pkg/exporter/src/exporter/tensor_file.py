"""Writer for the shared tensor container.

Byte layout (all little-endian):
  magic   8 bytes  b"DEPSEG01"
  dtype   1 byte   0 = float32, 1 = uint8, 2 = uint16
  rank    1 byte   1..4
  shape   rank x u32
  data    row-major payload

Deliberately independent of the pipeline package: the two sides share
only this byte layout, and the cross-boundary tests assert agreement.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"DEPSEG01"

_DTYPE_CODES = {
    np.dtype("<f4"): 0,
    np.dtype("uint8"): 1,
    np.dtype("<u2"): 2,
}


def encode(array) -> bytes:
    arr = np.ascontiguousarray(array)
    if arr.dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype {arr.dtype}; use float32/uint8/uint16")
    if not 1 <= arr.ndim <= 4:
        raise ValueError(f"rank must be 1..4, got {arr.ndim}")
    if any(s <= 0 for s in arr.shape):
        raise ValueError(f"all dims must be positive, got {arr.shape}")
    if any(s > 0xFFFFFFFF for s in arr.shape):
        raise ValueError(f"dim exceeds u32 range: {arr.shape}")
    header = MAGIC + struct.pack(
        f"<BB{arr.ndim}I", _DTYPE_CODES[arr.dtype], arr.ndim, *arr.shape
    )
    return header + arr.astype(arr.dtype.newbyteorder("<")).tobytes()


def write(array, path):
    """Atomic write: temp file in the target directory, then rename."""
    path = Path(path)
    data = encode(array)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
