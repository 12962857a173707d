"""Binary tensor container ("GEBT" format).

The on-disk layout is deliberately minimal so a hex dump is enough to audit
a file:

    bytes 0..3   magic  b"GEBT"
    byte  4      format version (1)
    byte  5      dtype code (1 = float32, little-endian)
    byte  6      ndim (1..5)
    next 4*ndim  dims, unsigned 32-bit little-endian, each >= 1
    rest         row-major float32 little-endian payload, 4 * prod(dims) bytes

There is exactly one dtype and no compression; every other binary artifact
in the toolkit (flow fields, RGB/flow windows) goes through this module.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"GEBT"
VERSION = 1
DTYPE_F32 = 1
MAX_NDIM = 5


class ContainerError(ValueError):
    """Raised for malformed or unsupported GEBT data."""


def write_tensor(dims, data) -> bytes:
    """Serialize ``data`` (flat or shaped array) with shape ``dims`` to GEBT bytes."""
    dims = [int(d) for d in dims]
    if not 1 <= len(dims) <= MAX_NDIM:
        raise ContainerError(f"ndim must be in [1,{MAX_NDIM}], got {len(dims)}")
    if any(d < 1 for d in dims):
        raise ContainerError(f"every dim must be >= 1, got {dims}")
    arr = np.asarray(data, dtype="<f4").reshape(-1)
    n = 1
    for d in dims:
        n *= d
    if arr.size != n:
        raise ContainerError(
            f"data length mismatch: {arr.size} values for dims {dims} (need {n})"
        )
    header = MAGIC + struct.pack("<BBB", VERSION, DTYPE_F32, len(dims))
    header += struct.pack("<" + "I" * len(dims), *dims)
    return header + arr.tobytes()


def read_tensor(blob: bytes):
    """Parse GEBT bytes; returns ``(dims, data)`` with ``data`` a flat float32 array.

    Rejects bad magic, unknown version/dtype, out-of-range dims and any
    payload length mismatch (including trailing bytes).
    """
    if len(blob) < 7 or blob[:4] != MAGIC:
        raise ContainerError("not a GEBT file (bad magic)")
    version, dtype, ndim = struct.unpack("<BBB", blob[4:7])
    if version != VERSION:
        raise ContainerError(f"unsupported GEBT version {version}")
    if dtype != DTYPE_F32:
        raise ContainerError(f"unsupported dtype code {dtype}")
    if not 1 <= ndim <= MAX_NDIM:
        raise ContainerError(f"ndim out of range: {ndim}")
    dims_end = 7 + 4 * ndim
    if len(blob) < dims_end:
        raise ContainerError("truncated header: payload length mismatch")
    dims = list(struct.unpack("<" + "I" * ndim, blob[7:dims_end]))
    if any(d < 1 for d in dims):
        raise ContainerError(f"every dim must be >= 1, got {dims}")
    n = 1
    for d in dims:
        n *= d
    payload = blob[dims_end:]
    if len(payload) != 4 * n:
        raise ContainerError(
            f"payload length mismatch: got {len(payload)} bytes, expected {4 * n}"
        )
    data = np.frombuffer(payload, dtype="<f4").copy()
    return dims, data


def write_tensor_file(path, dims, data) -> None:
    """Write a GEBT file atomically (temp file then rename)."""
    blob = write_tensor(dims, data)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def read_tensor_file(path):
    """Read a GEBT file; returns ``(dims, data)`` like :func:`read_tensor`."""
    with open(path, "rb") as fh:
        return read_tensor(fh.read())
