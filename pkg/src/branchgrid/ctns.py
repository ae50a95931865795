"""Reading and writing of the CTNS binary tensor container.

Layout: 8-byte magic ``CTNS0001``, one dtype byte (0 = complex64 with
interleaved re/im, 1 = float32, 2 = uint8), one rank byte (rank <= 4),
two reserved zero bytes, ``rank`` little-endian uint32 dims, then the
row-major payload in little-endian order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTNS0001"

_DTYPE_CODES = {
    0: np.dtype("<c8"),
    1: np.dtype("<f4"),
    2: np.dtype("|u1"),
}
_CODE_FOR_KIND = {"c": 0, "f": 1, "u": 2}

MAX_RANK = 4


class CtnsFormatError(ValueError):
    """Raised when a buffer does not follow the CTNS layout."""


def _code_for(arr: np.ndarray) -> int:
    kind = arr.dtype.kind
    if kind not in _CODE_FOR_KIND:
        raise CtnsFormatError(
            f"unsupported dtype {arr.dtype}; CTNS stores complex64, float32 or uint8"
        )
    return _CODE_FOR_KIND[kind]


def write(path: str | Path, arr: np.ndarray) -> None:
    """Write ``arr`` to ``path`` in CTNS format.

    Complex input is stored as complex64, floats as float32, unsigned
    integers as uint8. Rank must be at most 4.
    """
    arr = np.asarray(arr)
    if arr.ndim > MAX_RANK:
        raise CtnsFormatError(f"rank {arr.ndim} exceeds CTNS maximum of {MAX_RANK}")
    code = _code_for(arr)
    payload = np.ascontiguousarray(arr.astype(_DTYPE_CODES[code], copy=False))
    header = MAGIC + struct.pack("<BBH", code, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + dims + payload.tobytes())


def read(path: str | Path) -> np.ndarray:
    """Read a CTNS tensor from ``path``."""
    buf = Path(path).read_bytes()
    if len(buf) < 12:
        raise CtnsFormatError("truncated CTNS header")
    if buf[:8] != MAGIC:
        raise CtnsFormatError("bad magic; not a CTNS file")
    code, rank, reserved = struct.unpack("<BBH", buf[8:12])
    if code not in _DTYPE_CODES:
        raise CtnsFormatError(f"unknown dtype code {code}")
    if rank > MAX_RANK:
        raise CtnsFormatError(f"rank {rank} exceeds CTNS maximum of {MAX_RANK}")
    if reserved != 0:
        raise CtnsFormatError("reserved header bytes must be zero")
    if len(buf) < 12 + 4 * rank:
        raise CtnsFormatError("truncated dimension block")
    shape = struct.unpack(f"<{rank}I", buf[12 : 12 + 4 * rank])
    dtype = _DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    payload = buf[12 + 4 * rank :]
    if len(payload) != expected:
        raise CtnsFormatError(
            f"payload size {len(payload)} does not match dims {shape} ({expected} bytes)"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()
