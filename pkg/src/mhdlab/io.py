"""Self-describing little-endian array container and atomic file writes.

Layout::

    b"MHDC" | u16 version | u8 dtype code | u8 rank | rank x u64 dims
    | rank x (u16 length, utf-8 label) | payload (row-major, f64 LE)
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"MHDC"
VERSION = 1
DTYPES = {1: np.dtype("<f8")}
_CODES = {v: k for k, v in DTYPES.items()}


class ContainerError(ValueError):
    """Malformed container; ``code`` names the failure."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


def atomic_write(path: str | os.PathLike, data: bytes | str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_array(array: np.ndarray, labels: Sequence[str] | None = None) -> bytes:
    a = np.asarray(array)
    if a.dtype.kind != "f":
        raise ContainerError("bad_dtype", f"only float arrays are stored, got {a.dtype}")
    a = np.ascontiguousarray(a, dtype=DTYPES[1])
    labels = list(labels) if labels is not None else [f"axis{i}" for i in range(a.ndim)]
    if len(labels) != a.ndim:
        raise ContainerError("bad_labels", f"{len(labels)} labels for rank {a.ndim}")
    parts = [MAGIC, struct.pack("<HBB", VERSION, _CODES[DTYPES[1]], a.ndim)]
    parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
    for lab in labels:
        b = lab.encode("utf-8")
        parts.append(struct.pack("<H", len(b)) + b)
    parts.append(a.tobytes(order="C"))
    return b"".join(parts)


def decode_array(blob: bytes) -> tuple[np.ndarray, list[str]]:
    view = memoryview(blob)
    if len(view) < 8 or bytes(view[:4]) != MAGIC:
        raise ContainerError("bad_magic", "not an MHDC container")
    version, code, rank = struct.unpack_from("<HBB", view, 4)
    if version != VERSION:
        raise ContainerError("version_mismatch", f"container version {version}, reader expects {VERSION}")
    if code not in DTYPES:
        raise ContainerError("bad_dtype", f"unknown dtype code {code}")
    pos = 8
    if len(view) < pos + 8 * rank:
        raise ContainerError("truncated_header", "header ends before dims")
    dims = struct.unpack_from(f"<{rank}Q", view, pos)
    pos += 8 * rank
    labels = []
    for _ in range(rank):
        if len(view) < pos + 2:
            raise ContainerError("truncated_header", "header ends inside labels")
        (m,) = struct.unpack_from("<H", view, pos)
        pos += 2
        if len(view) < pos + m:
            raise ContainerError("truncated_header", "header ends inside labels")
        labels.append(bytes(view[pos:pos + m]).decode("utf-8"))
        pos += m
    dtype = DTYPES[code]
    want = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
    have = len(view) - pos
    if have != want:
        raise ContainerError("payload_length_mismatch",
                             f"payload length mismatch: header says {want} bytes, found {have}")
    data = np.frombuffer(view[pos:], dtype=dtype).reshape(dims)
    return data.astype(np.float64, copy=True), labels


def save_array(path: str | os.PathLike, array: np.ndarray, labels: Sequence[str] | None = None) -> None:
    atomic_write(path, encode_array(array, labels))


def load_array(path: str | os.PathLike) -> tuple[np.ndarray, list[str]]:
    return decode_array(Path(path).read_bytes())
