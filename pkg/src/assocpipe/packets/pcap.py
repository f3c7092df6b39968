"""Classic libpcap capture files: reading, writing and size-based splitting."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

MAGIC = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16


class PcapError(ValueError):
    """Malformed capture file."""


class TruncatedError(PcapError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class RawPacket:
    ts_sec: int
    ts_usec: int
    data: bytes
    orig_len: int | None = None

    @property
    def timestamp_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec

    @property
    def wire_len(self) -> int:
        return len(self.data) if self.orig_len is None else self.orig_len


@dataclass(frozen=True)
class GlobalHeader:
    byte_order: str  # "<" or ">"
    version: tuple[int, int]
    snaplen: int
    linktype: int

    def pack(self) -> bytes:
        return struct.pack(self.byte_order + "IHHiIII", MAGIC, self.version[0], self.version[1],
                           0, 0, self.snaplen, self.linktype)


DEFAULT_HEADER = GlobalHeader("<", (2, 4), 65535, LINKTYPE_ETHERNET)


def parse_global_header(buf: bytes) -> GlobalHeader:
    if len(buf) < GLOBAL_HEADER_LEN:
        raise TruncatedError("truncated global header", len(buf))
    for order in "<>":
        (magic,) = struct.unpack(order + "I", buf[:4])
        if magic == MAGIC:
            _, vmaj, vmin, _, _, snaplen, linktype = struct.unpack(order + "IHHiIII", buf[:24])
            return GlobalHeader(order, (vmaj, vmin), snaplen, linktype)
    raise PcapError(f"bad pcap magic {buf[:4].hex()}")


class PcapReader:
    """Iterate the records of an open capture stream."""

    def __init__(self, f: BinaryIO):
        self._f = f
        self.header = parse_global_header(f.read(GLOBAL_HEADER_LEN))
        self._rec = struct.Struct(self.header.byte_order + "IIII")
        self.offset = GLOBAL_HEADER_LEN

    def __iter__(self) -> Iterator[RawPacket]:
        read = self._f.read
        unpack = self._rec.unpack
        snaplen = self.header.snaplen
        while True:
            start = self.offset
            head = read(RECORD_HEADER_LEN)
            if not head:
                return
            if len(head) < RECORD_HEADER_LEN:
                raise TruncatedError("truncated record header", start)
            ts_sec, ts_usec, incl, orig = unpack(head)
            if incl > snaplen and snaplen:
                raise PcapError(f"record at offset {start} exceeds snap length ({incl} > {snaplen})")
            data = read(incl)
            if len(data) < incl:
                raise TruncatedError("truncated record data", start)
            self.offset = start + RECORD_HEADER_LEN + incl
            yield RawPacket(ts_sec, ts_usec, data, orig)


def read_pcap(path: str | os.PathLike) -> Iterator[RawPacket]:
    with open(path, "rb") as f:
        yield from PcapReader(f)


def read_header(path: str | os.PathLike) -> GlobalHeader:
    with open(path, "rb") as f:
        return parse_global_header(f.read(GLOBAL_HEADER_LEN))


def first_timestamp_us(path: str | os.PathLike) -> int | None:
    with open(path, "rb") as f:
        for p in PcapReader(f):
            return p.timestamp_us
    return None


def pack_record(p: RawPacket, byte_order: str = "<") -> bytes:
    return struct.pack(byte_order + "IIII", p.ts_sec, p.ts_usec, len(p.data), p.wire_len) + p.data


class PcapWriter:
    def __init__(self, f: BinaryIO, header: GlobalHeader = DEFAULT_HEADER):
        self._f = f
        self.header = header
        f.write(header.pack())
        self.bytes_written = 0  # record bytes, excluding the global header
        self.count = 0

    def write(self, p: RawPacket) -> int:
        rec = pack_record(p, self.header.byte_order)
        self._f.write(rec)
        self.bytes_written += len(rec)
        self.count += 1
        return len(rec)


def write_pcap(path: str | os.PathLike, packets: Iterable[RawPacket],
               header: GlobalHeader = DEFAULT_HEADER) -> int:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        w = PcapWriter(f, header)
        for p in packets:
            w.write(p)
    os.replace(tmp, path)
    return w.count


def split_name(stem: str, split_id: int, width: int = 4) -> str:
    return f"{stem}.pcap.{split_id:0{width}d}"


def split_pcap(path: str | os.PathLike, max_bytes: int, out_dir: str | os.PathLike | None = None,
               width: int = 4) -> list[Path]:
    """Split a capture into standalone files of at most ``max_bytes`` record bytes.

    Records are never bisected: a new file starts when the next record would
    push the current one past ``max_bytes``, so only a lone oversized record can
    exceed the limit.  Outputs are ``<out_dir>/<stem>.pcap.NNNN`` where
    ``stem`` is the input name without ``.pcap``.
    """
    if max_bytes < 1:
        raise ValueError("max_bytes must be positive")
    path = Path(path)
    out_dir = Path(out_dir) if out_dir is not None else path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = path.name[:-5] if path.name.endswith(".pcap") else path.name
    outputs: list[Path] = []

    with open(path, "rb") as src:
        reader = PcapReader(src)
        header = reader.header
        f = None
        writer = None

        def rotate():
            nonlocal f, writer
            if f is not None:
                f.close()
                os.replace(outputs[-1].with_name(outputs[-1].name + ".tmp"), outputs[-1])
            if len(outputs) >= 10 ** width:
                raise ValueError(f"more than {10 ** width - 1} splits; raise max_bytes or width")
            target = out_dir / split_name(stem, len(outputs), width)
            outputs.append(target)
            f = open(target.with_name(target.name + ".tmp"), "wb")
            writer = PcapWriter(f, header)

        try:
            rotate()
            for p in reader:
                size = RECORD_HEADER_LEN + len(p.data)
                if writer.count and writer.bytes_written + size > max_bytes:
                    rotate()
                writer.write(p)
        finally:
            if f is not None:
                f.close()
        os.replace(outputs[-1].with_name(outputs[-1].name + ".tmp"), outputs[-1])
    return outputs
