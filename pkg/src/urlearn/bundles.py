"""Versioned binary container for named float64 matrices.

Layout (all integers little-endian):

    magic b"URLM" | u32 version=1 | u32 meta_len | meta JSON (utf-8)
    u32 entry_count
    per entry: u16 name_len | name utf-8 | u32 rows | u32 cols
               rows*cols little-endian float64, row-major

The meta blob carries provenance (producing config, hash) and any scalar
fields that do not fit a matrix. Entry order is preserved.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ParseError

MAGIC = b"URLM"
VERSION = 1


def write_bundle(path, matrices: dict, meta: dict | None = None) -> None:
    """Write named matrices plus a JSON meta blob to `path`."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION)]
    parts.append(struct.pack("<I", len(meta_bytes)))
    parts.append(meta_bytes)
    parts.append(struct.pack("<I", len(matrices)))
    for name, mat in matrices.items():
        arr = np.ascontiguousarray(np.asarray(mat, dtype=np.float64))
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"bundle entry {name!r} is not a matrix")
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<II", arr.shape[0], arr.shape[1]))
        parts.append(arr.astype("<f8").tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Cursor:
    """Byte reader that reports the offset of any truncation."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ParseError(
                f"{self.path}: byte {self.pos}: truncated record, needed {n} more bytes"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_bundle(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a bundle back as (matrices, meta)."""
    with open(path, "rb") as fh:
        cur = _Cursor(fh.read(), path)
    if cur.take(4) != MAGIC:
        raise ParseError(f"{path}: byte 0: bad magic, not a matrix bundle")
    version = cur.u32()
    if version != VERSION:
        raise ParseError(f"{path}: byte 4: unsupported bundle version {version}")
    meta_len = cur.u32()
    try:
        meta = json.loads(cur.take(meta_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: byte 12: invalid meta blob: {exc}") from exc
    count = cur.u32()
    matrices: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = cur.take(cur.u16()).decode("utf-8")
        rows, cols = cur.u32(), cur.u32()
        raw = cur.take(rows * cols * 8)
        matrices[name] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
    if cur.pos != len(cur.data):
        raise ParseError(f"{path}: byte {cur.pos}: trailing bytes after last entry")
    return matrices, meta
