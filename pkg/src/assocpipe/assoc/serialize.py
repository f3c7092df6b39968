"""Binary save/load for associative arrays.

Layout (all integers little-endian)::

    b"AA01"                       magic + format version
    u8   value kind               0 numeric, 1 string
    u64  nrows, u64 ncols, u64 nnz
    nrows x (u32 len, utf-8)      row-key dictionary, sorted
    ncols x (u32 len, utf-8)      col-key dictionary, sorted
    nnz  x (u64 row, u64 col, u8 tag, payload)
                                  tag 0: i64, tag 1: f64, tag 2: u32 len + utf-8

Triples are written in row-major sorted order, so saving the same array
always yields the same bytes.
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

from .array import NUMERIC, STRING, AssociativeArray

MAGIC = b"AA01"

_HEAD = struct.Struct("<4sBQQQ")
_LEN = struct.Struct("<I")
_IDX = struct.Struct("<QQB")
_I64 = struct.Struct("<q")
_F64 = struct.Struct("<d")

TAG_INT, TAG_FLOAT, TAG_STR = 0, 1, 2


class FormatError(ValueError):
    """Raised for corrupt or truncated array files; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


def dumps(a: AssociativeArray) -> bytes:
    rows, cols = a.row_keys, a.col_keys
    ri = {k: i for i, k in enumerate(rows)}
    ci = {k: i for i, k in enumerate(cols)}
    kind = 1 if a.value_kind == STRING else 0
    out = [_HEAD.pack(MAGIC, kind, len(rows), len(cols), a.nnz)]
    for keys in (rows, cols):
        for k in keys:
            b = k.encode("utf-8")
            out.append(_LEN.pack(len(b)))
            out.append(b)
    pack_idx = _IDX.pack
    for key in sorted(k for k, _ in a.items()):
        v = a.get(*key)
        r, c = ri[key[0]], ci[key[1]]
        if isinstance(v, str):
            b = v.encode("utf-8")
            out.append(pack_idx(r, c, TAG_STR) + _LEN.pack(len(b)) + b)
        elif isinstance(v, int):
            out.append(pack_idx(r, c, TAG_INT) + _I64.pack(v))
        else:
            out.append(pack_idx(r, c, TAG_FLOAT) + _F64.pack(v))
    return b"".join(out)


def loads(buf: bytes) -> AssociativeArray:
    n = len(buf)
    if n < _HEAD.size:
        raise FormatError("truncated header", n)
    magic, kind, nrows, ncols, nnz = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", 0)
    if kind not in (0, 1):
        raise FormatError(f"unknown value kind {kind}", 4)
    pos = _HEAD.size

    def read_keys(count):
        nonlocal pos
        keys = []
        for _ in range(count):
            if pos + 4 > n:
                raise FormatError("truncated key length", pos)
            (ln,) = _LEN.unpack_from(buf, pos)
            pos += 4
            if pos + ln > n:
                raise FormatError("truncated key", pos)
            try:
                keys.append(buf[pos:pos + ln].decode("utf-8"))
            except UnicodeDecodeError:
                raise FormatError("invalid utf-8 in key", pos) from None
            pos += ln
        return keys

    rows = read_keys(nrows)
    cols = read_keys(ncols)
    data = {}
    idx_size = _IDX.size
    for _ in range(nnz):
        start = pos
        if pos + idx_size > n:
            raise FormatError("truncated triple", pos)
        r, c, tag = _IDX.unpack_from(buf, pos)
        pos += idx_size
        if r >= nrows or c >= ncols:
            raise FormatError("triple index out of range", start)
        if tag == TAG_STR:
            if pos + 4 > n:
                raise FormatError("truncated value length", pos)
            (ln,) = _LEN.unpack_from(buf, pos)
            pos += 4
            if pos + ln > n:
                raise FormatError("truncated string value", pos)
            v = buf[pos:pos + ln].decode("utf-8")
            pos += ln
        elif tag in (TAG_INT, TAG_FLOAT):
            if pos + 8 > n:
                raise FormatError("truncated numeric value", pos)
            (v,) = (_I64 if tag == TAG_INT else _F64).unpack_from(buf, pos)
            pos += 8
        else:
            raise FormatError(f"unknown value tag {tag}", start + 16)
        data[(rows[r], cols[c])] = v
    if pos != n:
        raise FormatError("trailing bytes after last triple", pos)
    return AssociativeArray(data, STRING if kind == 1 else NUMERIC)


def save(a: AssociativeArray, path: str | os.PathLike) -> None:
    """Write atomically: a reader never sees a half-written file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(a))
    os.replace(tmp, path)


def load(path: str | os.PathLike) -> AssociativeArray:
    return loads(Path(path).read_bytes())
