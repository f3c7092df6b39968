"""Header-field extraction (the tshark ``-T fields`` role) and TSV encoding."""
from __future__ import annotations

import os
import re
import socket
import struct
from dataclasses import dataclass
from datetime import datetime, timezone, tzinfo
from pathlib import Path
from typing import Iterable

from .pcap import RawPacket

FIELD_NAMES = (
    "frame.time_relative",
    "frame.time",
    "ip.dst",
    "ip.len",
    "ip.proto",
    "ip.src",
    "tcp.dstport",
    "tcp.flags",
    "tcp.srcport",
)
FORBIDDEN = ("|", "\t", "\n")

MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_MONTH_NUM = {m: i + 1 for i, m in enumerate(MONTHS)}

ETHERTYPE_IPV4 = 0x0800
PROTO_TCP = 6
PROTO_UDP = 17


class MalformedPacket(ValueError):
    pass


class TSVFormatError(ValueError):
    def __init__(self, message: str, path, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class PacketFields:
    """The nine header fields as the text a packet analyzer would print.

    Absent fields are empty strings.
    """

    frame_time_relative: str
    frame_time: str
    ip_dst: str = ""
    ip_len: str = ""
    ip_proto: str = ""
    ip_src: str = ""
    tcp_dstport: str = ""
    tcp_flags: str = ""
    tcp_srcport: str = ""

    def as_row(self) -> tuple[str, ...]:
        return (self.frame_time_relative, self.frame_time, self.ip_dst, self.ip_len, self.ip_proto,
                self.ip_src, self.tcp_dstport, self.tcp_flags, self.tcp_srcport)

    def as_dict(self) -> dict[str, str]:
        return dict(zip(FIELD_NAMES, self.as_row()))


def format_relative(delta_us: int) -> str:
    sign = "-" if delta_us < 0 else ""
    sec, usec = divmod(abs(delta_us), 1_000_000)
    return f"{sign}{sec}.{usec:06d}000"


class FrameTimeFormatter:
    """Formats epoch microseconds as ``YYYY Mon DD HH:MM:SS.fffff ZONE``.

    Fractional seconds are truncated to five digits.  The per-second prefix is
    cached since consecutive packets usually share a second.
    """

    def __init__(self, tz: tzinfo = timezone.utc):
        self.tz = tz
        self._sec = None
        self._parts = ("", "")

    def __call__(self, ts_us: int) -> str:
        sec, usec = divmod(ts_us, 1_000_000)
        if sec != self._sec:
            dt = datetime.fromtimestamp(sec, self.tz)
            head = f"{dt.year:04d} {MONTHS[dt.month - 1]} {dt.day:02d} {dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}"
            self._parts = (head, " " + (dt.tzname() or "UTC"))
            self._sec = sec
        return f"{self._parts[0]}.{usec // 10:05d}{self._parts[1]}"


_FRAME_TIME_RE = re.compile(r"^(\d{4}) ([A-Z][a-z]{2}) (\d{2}) (\d{2}:\d{2}:\d{2}\.\d+) \S+$")


def sortable_time(frame_time: str) -> str:
    """``2017 Apr 12 07:49:36.18828 EDT`` -> ``2017-04-12 07:49:36.18828``.

    Keeps the wall-clock reading and drops the zone, so ordering is only
    chronological within one zone.
    """
    m = _FRAME_TIME_RE.match(frame_time)
    if not m or m.group(2) not in _MONTH_NUM:
        raise ValueError(f"unrecognized frame.time {frame_time!r}")
    year, mon, day, clock = m.groups()
    return f"{year}-{_MONTH_NUM[mon]:02d}-{day} {clock}"


def _ip(b: bytes) -> str:
    return socket.inet_ntoa(b)


_ETH = struct.Struct("!12xH")
_IPV4 = struct.Struct("!BxH4xxB2x4s4s")  # vihl, total len, proto, src, dst
_PORTS = struct.Struct("!HH")


def extract_fields(p: RawPacket, t0_us: int, time_fmt: FrameTimeFormatter | None = None) -> PacketFields:
    """Decode Ethernet -> IPv4 -> TCP/UDP headers of one captured frame.

    Non-IPv4 frames yield only the ``frame.*`` fields.  Raises
    :class:`MalformedPacket` when a header is cut short.
    """
    if time_fmt is None:
        time_fmt = FrameTimeFormatter()
    ts = p.timestamp_us
    rel = format_relative(ts - t0_us)
    ftime = time_fmt(ts)
    data = p.data
    if len(data) < 14:
        raise MalformedPacket(f"frame of {len(data)} bytes is shorter than an Ethernet header")
    (ethertype,) = _ETH.unpack_from(data, 0)
    if ethertype != ETHERTYPE_IPV4:
        return PacketFields(rel, ftime)
    if len(data) < 34:
        raise MalformedPacket("truncated IPv4 header")
    vihl, total_len, proto, src, dst = _IPV4.unpack_from(data, 14)
    if vihl >> 4 != 4:
        raise MalformedPacket(f"IP version {vihl >> 4} in IPv4 frame")
    ihl = (vihl & 0x0F) * 4
    if ihl < 20 or len(data) < 14 + ihl:
        raise MalformedPacket(f"bad IPv4 header length {ihl}")
    ip_src, ip_dst = _ip(src), _ip(dst)
    if proto != PROTO_TCP:
        return PacketFields(rel, ftime, ip_dst, str(total_len), str(proto), ip_src)
    off = 14 + ihl
    if len(data) < off + 14:
        raise MalformedPacket("truncated TCP header")
    sport, dport = _PORTS.unpack_from(data, off)
    flags = ((data[off + 12] & 0x01) << 8) | data[off + 13]
    return PacketFields(rel, ftime, ip_dst, str(total_len), str(proto), ip_src,
                        str(dport), f"0x{flags:08x}", str(sport))


def parse_packets(packets: Iterable[RawPacket], t0_us: int | None = None,
                  tz: tzinfo = timezone.utc) -> tuple[list[PacketFields], int]:
    """Extract every packet; malformed ones are skipped and counted.

    ``t0_us`` defaults to the first packet's timestamp.
    """
    fmt = FrameTimeFormatter(tz)
    out: list[PacketFields] = []
    skipped = 0
    for p in packets:
        if t0_us is None:
            t0_us = p.timestamp_us
        try:
            out.append(extract_fields(p, t0_us, fmt))
        except MalformedPacket:
            skipped += 1
    return out, skipped


def check_sanitized(values: Iterable[str]) -> None:
    for v in values:
        for ch in FORBIDDEN:
            if ch in v:
                raise ValueError(f"field value {v!r} contains reserved character {ch!r}")


def write_tsv(records: Iterable[PacketFields], path: str | os.PathLike,
              header: tuple[str, ...] = FIELD_NAMES) -> int:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    n = 0
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(header) + "\n")
        for rec in records:
            row = rec.as_row() if isinstance(rec, PacketFields) else tuple(rec)
            check_sanitized(row)
            f.write("\t".join(row) + "\n")
            n += 1
    os.replace(tmp, path)
    return n


def read_tsv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as f:
        text = f.read()
    if not text:
        raise TSVFormatError("empty file (missing header)", path, 1)
    if not text.endswith("\n"):
        raise TSVFormatError("missing final newline", path, text.count("\n") + 1)
    lines = text[:-1].split("\n")
    header = lines[0].split("\t")
    width = len(header)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        row = line.split("\t")
        if len(row) != width:
            raise TSVFormatError(f"row has {len(row)} fields, header has {width}", path, i)
        rows.append(row)
    return header, rows
